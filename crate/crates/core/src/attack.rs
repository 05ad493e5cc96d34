//! The attack as a bounded bi-objective problem.
//!
//! For a target image `I` with attackable variables `x_i` at `(l, w, c)`:
//!
//! * `f1` = oracle probability of the clean prediction `c₀` on `I + X`,
//! * `f2` = l2 norm of the perturbation actually realised on `I + X`,
//! * `0 ≤ u_i + x_i ≤ 255`, i.e. `x_i ∈ [−u_i, 255 − u_i]`.
//!
//! A candidate succeeds when the oracle's argmax differs from `c₀`. The
//! final adversarial example is the successful candidate with the smallest
//! `f2`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::time::Duration;

use thiserror::Error;

use crate::attention::{compute_cam, AttentionError, AttentionMap, ProxyModel, Upsampling};
use crate::image::{apply_perturbation, effective_perturbation, l2_norm, Image, ImageError, SparsePerturbation};
use crate::masking::{binarize, build_index, checkerboard, parity_refine, MaskError, Parity, PixelMask, VariableIndex};
use crate::moea::{run_nsga2, Bounds, ConfigError, Evaluation, HistoryEntry, MoeaConfig, Objectives, Problem, RunError};
use crate::oracle::{Oracle, OracleError, QueryExecutor};

/// Feasible perturbation interval for a pixel of intensity `u`.
pub fn bounds_for(u: u8) -> (f64, f64) {
    let u = f64::from(u);
    (-u, 255.0 - u)
}

/// The oracle's verdict on one evaluated candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: usize,
    /// Probability of `class`.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluationFailure {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation of genome {genome} failed: {source}")]
pub struct EvaluationError {
    /// Zero-based evaluation ordinal of the failing genome.
    pub genome: usize,
    #[source]
    pub source: EvaluationFailure,
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("delta_max must be finite and nonnegative, got {0}")]
    DeltaMax(f64),
    #[error("no attackable pixels: the image has zero area")]
    EmptyMask,
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("querying the clean image failed: {0}")]
    CleanQuery(#[source] OracleError),
    #[error("{source} (after {} successful evaluations)", history.len())]
    Evaluation {
        #[source]
        source: EvaluationError,
        history: Vec<HistoryEntry<Prediction>>,
    },
}

impl AttackError {
    /// Evaluations completed before the failure, if any.
    pub fn partial_history(&self) -> &[HistoryEntry<Prediction>] {
        match self {
            AttackError::Evaluation { history, .. } => history,
            _ => &[],
        }
    }
}

/// The attack over a fixed set of variables.
pub struct AttackProblem<'a> {
    image: &'a Image,
    index: VariableIndex,
    bounds: Bounds,
    oracle: &'a dyn Oracle,
    executor: &'a dyn QueryExecutor,
    original_class: usize,
    clean_confidence: f64,
    queries: usize,
}

impl<'a> AttackProblem<'a> {
    /// Queries the clean image once to fix `c₀` and `P₀`.
    pub fn new(
        image: &'a Image,
        index: VariableIndex,
        delta_max: Option<f64>,
        oracle: &'a dyn Oracle,
        executor: &'a dyn QueryExecutor,
    ) -> Result<Self, AttackError> {
        if index.shape() != image.shape() {
            return Err(ImageError::ShapeMismatch {
                expected: image.shape(),
                found: index.shape(),
            }
            .into());
        }
        if index.is_empty() {
            return Err(AttackError::EmptyMask);
        }
        if let Some(delta) = delta_max {
            if !(delta.is_finite() && delta >= 0.0) {
                return Err(AttackError::DeltaMax(delta));
            }
        }
        let (lower, upper): (Vec<f64>, Vec<f64>) = index
            .coords()
            .iter()
            .map(|c| {
                let (lo, hi) = bounds_for(image.get(c.row, c.col, c.channel));
                match delta_max {
                    Some(d) => (lo.max(-d), hi.min(d)),
                    None => (lo, hi),
                }
            })
            .unzip();
        let bounds = Bounds::new(lower, upper)?;
        let clean = oracle.classify(image).map_err(AttackError::CleanQuery)?;
        Ok(AttackProblem {
            image,
            index,
            bounds,
            oracle,
            executor,
            original_class: clean.class(),
            clean_confidence: clean.confidence(),
            queries: 1,
        })
    }

    pub fn index(&self) -> &VariableIndex {
        &self.index
    }

    pub fn dimension(&self) -> usize {
        self.index.len()
    }

    pub fn original_class(&self) -> usize {
        self.original_class
    }

    pub fn clean_confidence(&self) -> f64 {
        self.clean_confidence
    }

    /// Oracle queries made so far, the clean image included.
    pub fn queries(&self) -> usize {
        self.queries
    }

    /// The image submitted to the oracle for `genome`.
    pub fn candidate(&self, genome: &[f64]) -> Result<Image, ImageError> {
        apply_perturbation(self.image, &SparsePerturbation::from_genome(genome), &self.index)
    }

    pub fn effective(&self, genome: &[f64]) -> Result<SparsePerturbation, ImageError> {
        effective_perturbation(self.image, &SparsePerturbation::from_genome(genome), &self.index)
    }

    /// Evaluates one genome with one oracle query.
    pub fn evaluate(&mut self, genome: &[f64]) -> Result<(Objectives, Prediction), EvaluationError> {
        let mut out = self.evaluate_batch(&[genome.to_vec()]);
        out.pop()
            .expect("one result per genome")
            .map(|e| (e.objectives, e.meta))
    }
}

impl Problem for AttackProblem<'_> {
    type Meta = Prediction;
    type Error = EvaluationError;

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn evaluate_batch(&mut self, genomes: &[Vec<f64>]) -> Vec<Result<Evaluation<Prediction>, EvaluationError>> {
        let first = self.queries - 1;
        let mut images = Vec::with_capacity(genomes.len());
        let mut distances = Vec::with_capacity(genomes.len());
        for (k, genome) in genomes.iter().enumerate() {
            let prepared = self
                .candidate(genome)
                .and_then(|img| self.effective(genome).map(|eff| (img, l2_norm(&eff))));
            match prepared {
                Ok((img, f2)) => {
                    images.push(img);
                    distances.push(f2);
                }
                Err(e) => {
                    // queries for earlier genomes still go out
                    let mut out = self.query(&images, &distances, first);
                    if out.last().is_none_or(|r| r.is_ok()) {
                        out.push(Err(EvaluationError {
                            genome: first + k,
                            source: e.into(),
                        }));
                    }
                    return out;
                }
            }
        }
        self.query(&images, &distances, first)
    }
}

impl AttackProblem<'_> {
    fn query(
        &mut self,
        images: &[Image],
        distances: &[f64],
        first: usize,
    ) -> Vec<Result<Evaluation<Prediction>, EvaluationError>> {
        if images.is_empty() {
            return Vec::new();
        }
        let responses = self.executor.classify_all(self.oracle, images);
        self.queries += responses.len();
        let c0 = self.original_class;
        let mut out = Vec::with_capacity(responses.len());
        for (k, (response, &f2)) in responses.into_iter().zip(distances).enumerate() {
            match response {
                Ok(r) => out.push(Ok(Evaluation {
                    objectives: [r.probability(c0), f2],
                    meta: Prediction {
                        class: r.class(),
                        confidence: r.confidence(),
                    },
                })),
                Err(e) => {
                    out.push(Err(EvaluationError {
                        genome: first + k,
                        source: e.into(),
                    }));
                    break;
                }
            }
        }
        out
    }
}

/// Successful entry (`class ≠ original_class`) with the smallest `f2`;
/// ties go to the earliest evaluation.
pub fn select_final_ae<'h, I>(entries: I, original_class: usize) -> Option<&'h HistoryEntry<Prediction>>
where
    I: IntoIterator<Item = &'h HistoryEntry<Prediction>>,
{
    let mut best: Option<&HistoryEntry<Prediction>> = None;
    for e in entries {
        if e.meta.class == original_class {
            continue;
        }
        match best {
            Some(b) if (e.objectives[1], e.eval_index) >= (b.objectives[1], b.eval_index) => {}
            _ => best = Some(e),
        }
    }
    best
}

/// Where the attention map comes from.
#[derive(Debug, Clone, Copy)]
pub enum AttentionSource<'a> {
    /// Class activation map of the white-box proxy.
    Proxy(&'a ProxyModel),
    /// A precomputed map, e.g. loaded from disk.
    Map(&'a AttentionMap),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub moea: MoeaConfig,
    /// Restrict variables to nonzero attention.
    pub use_attention: bool,
    /// Keep only one checkerboard half.
    pub use_parity: bool,
    pub parity: Parity,
    /// Symmetric cap on `|x_i|` on top of the intensity box.
    pub delta_max: Option<f64>,
    /// Choose the final example among the final first front only instead
    /// of the whole history.
    pub final_from_front_only: bool,
    pub upsampling: Upsampling,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            moea: MoeaConfig::default(),
            use_attention: true,
            use_parity: true,
            parity: Parity::Even,
            delta_max: None,
            final_from_front_only: false,
            upsampling: Upsampling::Bilinear,
        }
    }
}

/// One member of the final first front.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontPoint {
    pub eval_index: usize,
    pub objectives: Objectives,
    pub prediction: Prediction,
    pub genome: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialExample {
    pub eval_index: usize,
    pub image: Image,
    /// Realised (integer) perturbation, one entry per variable.
    pub perturbation: SparsePerturbation,
    pub class: usize,
    pub confidence: f64,
    /// Remaining probability of the original class.
    pub original_probability: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub original_class: usize,
    pub clean_confidence: f64,
    pub attention: Option<AttentionMap>,
    /// Spatial mask the variables were drawn from.
    pub mask: PixelMask,
    pub index: VariableIndex,
    /// True when the refined mask was empty and the checkerboard over the
    /// whole image was used instead.
    pub used_fallback: bool,
    pub history: Vec<HistoryEntry<Prediction>>,
    /// Final first front, sorted by `f2` ascending.
    pub front: Vec<FrontPoint>,
    pub final_ae: Option<AdversarialExample>,
    pub queries: usize,
    pub generations: usize,
    /// Filled in by callers that can read a clock.
    pub wall_time: Option<Duration>,
    pub config: AttackConfig,
    pub warnings: Vec<String>,
}

impl AttackReport {
    pub fn succeeded(&self) -> bool {
        self.final_ae.is_some()
    }

    pub fn dimension(&self) -> usize {
        self.index.len()
    }
}

/// Builds the final variable mask for `image`, returning it with a
/// fallback flag.
pub fn attack_mask(
    image: &Image,
    attention: Option<&AttentionMap>,
    use_parity: bool,
    parity: Parity,
) -> Result<(PixelMask, bool), AttackError> {
    let (h, w) = (image.height(), image.width());
    let mut mask = match attention {
        Some(map) => {
            map.check_matches(image)?;
            binarize(map)
        }
        None => PixelMask::full(h, w),
    };
    if use_parity {
        mask = parity_refine(&mask, parity);
    }
    if !mask.is_empty() {
        return Ok((mask, false));
    }
    let fallback = checkerboard(h, w, parity);
    if fallback.is_empty() {
        // a 1x1 image has no odd cell
        let full = PixelMask::full(h, w);
        if full.is_empty() {
            return Err(AttackError::EmptyMask);
        }
        return Ok((full, true));
    }
    Ok((fallback, true))
}

/// Runs the full pipeline: attention → binarize → parity refinement →
/// variable index → NSGA-II → final example selection.
pub fn run_attack(
    image: &Image,
    oracle: &dyn Oracle,
    attention: AttentionSource<'_>,
    config: &AttackConfig,
    executor: &dyn QueryExecutor,
) -> Result<AttackReport, AttackError> {
    config.moea.validate()?;
    if let Some(delta) = config.delta_max {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(AttackError::DeltaMax(delta));
        }
    }
    if image.shape().area() == 0 {
        return Err(AttackError::EmptyMask);
    }
    let mut warnings = Vec::new();

    let map = if config.use_attention {
        Some(match attention {
            AttentionSource::Proxy(proxy) => compute_cam(proxy, image, config.upsampling)?,
            AttentionSource::Map(map) => map.clone(),
        })
    } else {
        None
    };
    let (mask, used_fallback) = attack_mask(image, map.as_ref(), config.use_parity, config.parity)?;
    if used_fallback {
        warnings.push(String::from(
            "attention mask is empty after refinement; attacking the checkerboard over the whole image",
        ));
    }
    let index = build_index(&mask, image.channels())?;

    let mut problem = AttackProblem::new(image, index, config.delta_max, oracle, executor)?;
    let outcome = match run_nsga2(&mut problem, &config.moea) {
        Ok(o) => o,
        Err(RunError::Config(e)) => return Err(e.into()),
        Err(RunError::Evaluation { source, history, .. }) => {
            return Err(AttackError::Evaluation { source, history });
        }
    };
    let original_class = problem.original_class();

    let mut front: Vec<FrontPoint> = outcome
        .front()
        .map(|ind| FrontPoint {
            eval_index: ind.eval_index,
            objectives: ind.objectives,
            prediction: outcome.history[ind.eval_index].meta,
            genome: ind.genome.clone(),
        })
        .collect();
    front.sort_by(|a, b| {
        a.objectives[1]
            .total_cmp(&b.objectives[1])
            .then(a.objectives[0].total_cmp(&b.objectives[0]))
            .then(a.eval_index.cmp(&b.eval_index))
    });

    let chosen = if config.final_from_front_only {
        select_final_ae(front.iter().map(|p| &outcome.history[p.eval_index]), original_class)
    } else {
        select_final_ae(&outcome.history, original_class)
    };
    let final_ae = match chosen {
        Some(entry) => Some(AdversarialExample {
            eval_index: entry.eval_index,
            image: problem.candidate(&entry.genome)?,
            perturbation: problem.effective(&entry.genome)?,
            class: entry.meta.class,
            confidence: entry.meta.confidence,
            original_probability: entry.objectives[0],
            l2: entry.objectives[1],
        }),
        None => {
            warnings.push(format!(
                "no evaluated candidate changed the prediction away from class {original_class}"
            ));
            None
        }
    };

    Ok(AttackReport {
        original_class,
        clean_confidence: problem.clean_confidence(),
        attention: map,
        mask,
        index: problem.index().clone(),
        used_fallback,
        queries: problem.queries(),
        generations: outcome.generations,
        history: outcome.history,
        front,
        final_ae,
        wall_time: None,
        config: config.clone(),
        warnings,
    })
}
