//! The ordering model: patch tokens, optional cinematology tokens, a
//! pre-norm encoder and a linear head over the class token.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shotseq_core::CATEGORY_COUNT;

use crate::array::{DenseArray, ParamId, ParamStore};
use crate::cinematology::CinematologyInput;
use crate::config::ModelConfig;
use crate::error::NnError;
use crate::layers::{register_normal, Block, BlockCache, LayerNorm, LayerNormCache, Linear};
use crate::real::Real;

/// One sample: frames laid out `k x segments x H x W x C`, shots in
/// presentation order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleInput<T> {
    pub frames: Vec<T>,
    /// Absent labels are treated as all-zero vectors.
    pub cinematology: Option<CinematologyInput>,
}

#[derive(Debug, Clone)]
struct CinematologyHead {
    proj: [Linear; CATEGORY_COUNT],
    pos: ParamId,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardPass<T> {
    logits: Vec<T>,
    patches: Vec<T>,
    cine_inputs: Option<[Vec<T>; CATEGORY_COUNT]>,
    blocks: Vec<BlockCache<T>>,
    norm: LayerNormCache<T>,
    cls_norm: Vec<T>,
    seq_len: usize,
}

impl<T: Real> ForwardPass<T> {
    pub fn logits(&self) -> &[T] {
        &self.logits
    }

    pub fn sequence_len(&self) -> usize {
        self.seq_len
    }

    /// Attention weights of `layer`, laid out `heads x seq x seq`.
    pub fn attention(&self, layer: usize) -> &[T] {
        &self.blocks[layer].attn.weights
    }

    pub fn num_layers(&self) -> usize {
        self.blocks.len()
    }
}

fn check_finite<T: Real>(values: &[T], layer: &str) -> Result<(), NnError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFinite {
            layer: layer.to_string(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct VideoOrderModel<T> {
    config: ModelConfig,
    store: ParamStore<T>,
    patch: Linear,
    cls: ParamId,
    pos_slot: ParamId,
    pos_segment: ParamId,
    pos_patch: ParamId,
    cine: Option<CinematologyHead>,
    blocks: Vec<Block>,
    norm: LayerNorm,
    head: Linear,
}

impl<T: Real> VideoOrderModel<T> {
    /// Fresh parameters drawn from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self, NnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::default();
        let d = config.embed_dim;

        let patch = Linear::register(&mut store, "patch_embed", config.patch_dim(), d, &mut rng);
        let cls = register_normal(&mut store, "cls_token".into(), &[d], &mut rng);
        let pos_slot = register_normal(&mut store, "pos.slot".into(), &[config.k, d], &mut rng);
        let pos_segment = register_normal(
            &mut store,
            "pos.segment".into(),
            &[config.segments_per_shot, d],
            &mut rng,
        );
        let pos_patch = register_normal(
            &mut store,
            "pos.patch".into(),
            &[config.patches_per_frame(), d],
            &mut rng,
        );
        let cine = config.use_cinematology.then(|| {
            let proj = std::array::from_fn(|c| {
                Linear::register(
                    &mut store,
                    &format!("cine.proj{c}"),
                    config.cinematology_width(c),
                    d,
                    &mut rng,
                )
            });
            let pos = register_normal(
                &mut store,
                "cine.pos".into(),
                &[CATEGORY_COUNT, d],
                &mut rng,
            );
            CinematologyHead { proj, pos }
        });
        let blocks = (0..config.num_layers)
            .map(|i| {
                Block::register(
                    &mut store,
                    &format!("blocks.{i}"),
                    d,
                    config.num_heads,
                    config.mlp_ratio,
                    &mut rng,
                )
            })
            .collect();
        let norm = LayerNorm::register(&mut store, "norm", d);
        let head = Linear::register(&mut store, "head", d, config.num_classes(), &mut rng);

        Ok(VideoOrderModel {
            config,
            store,
            patch,
            cls,
            pos_slot,
            pos_segment,
            pos_patch,
            cine,
            blocks,
            norm,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn num_parameters(&self) -> usize {
        self.store.scalar_count()
    }

    /// Replaces every parameter value, keeping names and shapes.
    pub fn load_values(&mut self, values: Vec<Vec<T>>) -> Result<(), NnError> {
        if values.len() != self.store.len() {
            return Err(NnError::Shape(format!(
                "{} parameter blobs, model has {}",
                values.len(),
                self.store.len()
            )));
        }
        for ((name, array), v) in self.store.iter_mut().zip(values) {
            if v.len() != array.len() {
                return Err(NnError::Shape(format!(
                    "{name}: {} values, expected {}",
                    v.len(),
                    array.len()
                )));
            }
            *array = DenseArray::from_values(array.shape(), v)?;
        }
        Ok(())
    }

    /// Splits frames into patch vectors, one row per visual token, ordered by
    /// shot slot, then segment, then patch position in row-major order.
    fn patchify(&self, frames: &[T]) -> Result<Vec<T>, NnError> {
        let c = &self.config;
        if frames.len() != c.input_len() {
            return Err(NnError::Shape(format!(
                "frames have {} values, expected {} (k={} segments={} {}x{}x{})",
                frames.len(),
                c.input_len(),
                c.k,
                c.segments_per_shot,
                c.frame_height,
                c.frame_width,
                c.channels
            )));
        }
        let (p, ch, w) = (c.patch_size, c.channels, c.frame_width);
        let (gh, gw) = (c.frame_height / p, c.frame_width / p);
        let mut out = Vec::with_capacity(c.visual_tokens() * c.patch_dim());
        for frame in frames.chunks_exact(c.frame_len()) {
            for py in 0..gh {
                for px in 0..gw {
                    for dy in 0..p {
                        let start = ((py * p + dy) * w + px * p) * ch;
                        out.extend_from_slice(&frame[start..start + p * ch]);
                    }
                }
            }
        }
        Ok(out)
    }

    fn visual_position(&self, token: usize) -> (usize, usize, usize) {
        let per_frame = self.config.patches_per_frame();
        let frame = token / per_frame;
        (
            frame / self.config.segments_per_shot,
            frame % self.config.segments_per_shot,
            token % per_frame,
        )
    }

    fn embed(&self, patches: &[T]) -> Vec<T> {
        let d = self.config.embed_dim;
        let v = self.config.visual_tokens();
        let projected = self.patch.forward(&self.store, patches, v);
        let (slot, seg, pat) = (
            self.store.values(self.pos_slot),
            self.store.values(self.pos_segment),
            self.store.values(self.pos_patch),
        );
        let mut tokens = Vec::with_capacity((v + 1) * d);
        tokens.extend_from_slice(self.store.values(self.cls));
        for (t, row) in projected.chunks_exact(d).enumerate() {
            let (a, b, c) = self.visual_position(t);
            tokens
                .extend((0..d).map(|j| row[j] + slot[a * d + j] + seg[b * d + j] + pat[c * d + j]));
        }
        tokens
    }

    /// Class token followed by positioned patch embeddings, `[1 + visual, embed_dim]`.
    pub fn patch_embed(&self, frames: &[T]) -> Result<Vec<T>, NnError> {
        Ok(self.embed(&self.patchify(frames)?))
    }

    fn cinematology_inputs(
        &self,
        cine: &CinematologyInput,
    ) -> Result<[Vec<T>; CATEGORY_COUNT], NnError> {
        cine.check_against(&self.config)?;
        Ok(std::array::from_fn(|c| {
            cine.concatenated(c).into_iter().map(T::from_f64).collect()
        }))
    }

    fn project_cinematology(
        &self,
        head: &CinematologyHead,
        inputs: &[Vec<T>; CATEGORY_COUNT],
    ) -> Vec<T> {
        inputs
            .iter()
            .zip(&head.proj)
            .flat_map(|(x, proj)| proj.forward(&self.store, x, 1))
            .collect()
    }

    /// The four category tokens before positional terms, `[4, embed_dim]`.
    pub fn cinematology_tokens(&self, cine: &CinematologyInput) -> Result<Vec<T>, NnError> {
        let head = self
            .cine
            .as_ref()
            .ok_or_else(|| NnError::Config("cinematology tokens are disabled".into()))?;
        let inputs = self.cinematology_inputs(cine)?;
        Ok(self.project_cinematology(head, &inputs))
    }

    pub fn forward(&self, input: &SampleInput<T>) -> Result<ForwardPass<T>, NnError> {
        check_finite(&input.frames, "input")?;
        let d = self.config.embed_dim;
        let patches = self.patchify(&input.frames)?;
        let mut x = self.embed(&patches);

        let cine_inputs = match &self.cine {
            Some(head) => {
                let blank;
                let cine = match &input.cinematology {
                    Some(c) => c,
                    None => {
                        blank = CinematologyInput::blank(&self.config);
                        &blank
                    }
                };
                let inputs = self.cinematology_inputs(cine)?;
                let tokens = self.project_cinematology(head, &inputs);
                let pos = self.store.values(head.pos);
                x.extend(tokens.iter().zip(pos).map(|(&t, &p)| t + p));
                Some(inputs)
            }
            None => None,
        };
        check_finite(&x, "embedding")?;

        let seq_len = x.len() / d;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (i, block) in self.blocks.iter().enumerate() {
            blocks.push(block.forward(&self.store, &mut x, seq_len));
            check_finite(&x, &format!("block {i}"))?;
        }
        let (cls_norm, norm) = self.norm.forward(&self.store, &x[..d]);
        let logits = self.head.forward(&self.store, &cls_norm, 1);
        check_finite(&logits, "head")?;

        Ok(ForwardPass {
            logits,
            patches,
            cine_inputs,
            blocks,
            norm,
            cls_norm,
            seq_len,
        })
    }

    pub fn logits(&self, input: &SampleInput<T>) -> Result<Vec<T>, NnError> {
        Ok(self.forward(input)?.logits)
    }

    /// Adds the parameter gradients for upstream logit gradient `dlogits`.
    pub fn backward(&mut self, pass: &ForwardPass<T>, dlogits: &[T]) -> Result<(), NnError> {
        let d = self.config.embed_dim;
        if dlogits.len() != self.config.num_classes() {
            return Err(NnError::Shape(format!(
                "{} logit gradients, expected {}",
                dlogits.len(),
                self.config.num_classes()
            )));
        }
        let store = &mut self.store;
        let dcls = self
            .head
            .backward(store, &pass.cls_norm, 1, dlogits, true)
            .expect("dx requested");
        let dcls = self.norm.backward(store, &pass.norm, &dcls);

        let mut dx = vec![T::zero(); pass.seq_len * d];
        dx[..d].copy_from_slice(&dcls);
        for (block, cache) in self.blocks.iter().zip(&pass.blocks).rev() {
            dx = block.backward(store, cache, pass.seq_len, dx);
        }

        add_into(store.get_mut(self.cls).grad_mut(), &dx[..d]);
        let v = self.config.visual_tokens();
        let dvis = &dx[d..(1 + v) * d];
        for (t, row) in dvis.chunks_exact(d).enumerate() {
            let per_frame = self.config.patches_per_frame();
            let frame = t / per_frame;
            let (a, b, c) = (
                frame / self.config.segments_per_shot,
                frame % self.config.segments_per_shot,
                t % per_frame,
            );
            add_into(
                &mut store.get_mut(self.pos_slot).grad_mut()[a * d..(a + 1) * d],
                row,
            );
            add_into(
                &mut store.get_mut(self.pos_segment).grad_mut()[b * d..(b + 1) * d],
                row,
            );
            add_into(
                &mut store.get_mut(self.pos_patch).grad_mut()[c * d..(c + 1) * d],
                row,
            );
        }
        self.patch.backward(store, &pass.patches, v, dvis, false);

        if let (Some(head), Some(inputs)) = (&self.cine, &pass.cine_inputs) {
            let dcine = &dx[(1 + v) * d..];
            add_into(store.get_mut(head.pos).grad_mut(), dcine);
            for (c, (proj, x)) in head.proj.iter().zip(inputs).enumerate() {
                proj.backward(store, x, 1, &dcine[c * d..(c + 1) * d], false);
            }
        }
        Ok(())
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    dst.iter_mut().zip(src).for_each(|(a, &b)| *a = *a + b);
}
