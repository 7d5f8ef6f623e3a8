//! Robustness certification: perturbation spaces, certified margins, dataset
//! sweeps, maximal-radius search and the domain comparison harness.
//!
//! A sample is certified at radius eps when it is correctly classified and the
//! lower bound of y_true - y_other is positive for every other class, with the
//! margin evaluated *inside* the abstract domain (the difference is an affine
//! map, so shared noise symbols cancel exactly; subtracting concretized
//! intervals would be strictly looser).

use std::time::Instant;

use crate::cell::{forward_abstract, forward_logits, Model};
use crate::domain::{AbstractDomain, InterZono, NoisePool, Zonotope};
use crate::error::DomainError;
use crate::math::Matrix;
use crate::parallel;
use crate::scalar::Scalar;

/// Which frames the adversary may perturb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Every frame moves inside its own ball; the product space of a
    /// worst-case multi-frame adversary.
    AllFrame,
    /// Only the given frame moves, all others stay clean.
    OneFrame(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct PerturbationSpec {
    /// l-infinity radius in embedding space.
    pub epsilon: f64,
    pub strategy: Strategy,
}

impl PerturbationSpec {
    pub fn all_frame(epsilon: f64) -> Self {
        PerturbationSpec {
            epsilon,
            strategy: Strategy::AllFrame,
        }
    }

    pub fn one_frame(epsilon: f64, t: usize) -> Self {
        PerturbationSpec {
            epsilon,
            strategy: Strategy::OneFrame(t),
        }
    }
}

/// Which abstract pipeline to propagate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Zonotope,
    InterZono,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Zonotope => "zonotope",
            DomainKind::InterZono => "interzono",
        }
    }
}

/// A labeled input sequence in embedding space.
#[derive(Debug, Clone)]
pub struct Sample {
    pub frames: Vec<Vec<f64>>,
    pub label: usize,
}

/// Per-frame input domains for the chosen strategy. All-frame allocates T*d
/// fresh symbols (one per frame coordinate); one-frame makes every other
/// frame an exact point.
pub fn build_input_domain<S: Scalar, D: AbstractDomain<S>>(
    frames: &[Vec<S>],
    spec: &PerturbationSpec,
    pool: &mut NoisePool,
) -> Result<Vec<D>, DomainError> {
    if let Strategy::OneFrame(t) = spec.strategy {
        if t >= frames.len() {
            return Err(DomainError::dim("one-frame index", frames.len(), t));
        }
    }
    Ok(frames
        .iter()
        .enumerate()
        .map(|(t, x)| {
            let perturbed = match spec.strategy {
                Strategy::AllFrame => true,
                Strategy::OneFrame(i) => i == t,
            };
            if perturbed && spec.epsilon > 0.0 {
                D::from_ball(x, spec.epsilon, pool)
            } else {
                D::point(x.clone())
            }
        })
        .collect())
}

/// Lower bounds of y_true - y_f for every incorrect class f.
#[derive(Debug, Clone)]
pub struct MarginBounds {
    pub true_class: usize,
    /// (incorrect class, lower bound of the margin).
    pub lower: Vec<(usize, f64)>,
}

impl MarginBounds {
    pub fn min_margin(&self) -> f64 {
        self.lower
            .iter()
            .map(|&(_, m)| m)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn all_positive(&self) -> bool {
        self.lower.iter().all(|&(_, m)| m > 0.0)
    }
}

/// Margins via the exact affine map e_t - e_f applied inside the domain.
pub fn margin_lower_bounds<D: AbstractDomain<f64>>(
    logit_domain: &D,
    true_class: usize,
) -> Result<MarginBounds, DomainError> {
    let classes = logit_domain.dim();
    if true_class >= classes {
        return Err(DomainError::dim("true class", classes, true_class));
    }
    let mut lower = Vec::with_capacity(classes - 1);
    for f in 0..classes {
        if f == true_class {
            continue;
        }
        let mut row = vec![0.0f64; classes];
        row[true_class] = 1.0;
        row[f] = -1.0;
        let diff = logit_domain.affine(&Matrix::new(1, classes, row), &[0.0])?;
        let b = diff.bounds()?;
        lower.push((f, b.lower[0]));
    }
    Ok(MarginBounds { true_class, lower })
}

#[derive(Debug, Clone)]
pub struct CertificationResult {
    pub certified: bool,
    pub clean_correct: bool,
    pub margins: Option<MarginBounds>,
    /// Set when propagation aborted on an internal invariant violation; the
    /// sample counts as not certified.
    pub diagnostic: Option<String>,
    pub elapsed_secs: f64,
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    let _ = xs[best];
    best
}

fn certify_with<D: AbstractDomain<f64>>(
    model: &Model<f64>,
    sample: &Sample,
    spec: &PerturbationSpec,
) -> Result<MarginBounds, DomainError> {
    let mut pool = NoisePool::new();
    let domains: Vec<D> = build_input_domain(&sample.frames, spec, &mut pool)?;
    let logit_domain = forward_abstract(model, &domains, &mut pool)?;
    margin_lower_bounds(&logit_domain, sample.label)
}

/// Certifies one sample: clean correctness plus positive margin lower bounds
/// for the chosen domain pipeline.
pub fn certify(
    model: &Model<f64>,
    sample: &Sample,
    spec: &PerturbationSpec,
    domain: DomainKind,
) -> CertificationResult {
    let start = Instant::now();
    let logits = forward_logits(model, &sample.frames);
    let clean_correct = argmax(&logits) == sample.label;
    if !clean_correct {
        // A misclassified sample is never certified.
        return CertificationResult {
            certified: false,
            clean_correct: false,
            margins: None,
            diagnostic: None,
            elapsed_secs: start.elapsed().as_secs_f64(),
        };
    }
    let margins = match domain {
        DomainKind::Zonotope => certify_with::<Zonotope<f64>>(model, sample, spec),
        DomainKind::InterZono => certify_with::<InterZono<f64>>(model, sample, spec),
    };
    match margins {
        Ok(margins) => CertificationResult {
            certified: margins.all_positive(),
            clean_correct: true,
            margins: Some(margins),
            diagnostic: None,
            elapsed_secs: start.elapsed().as_secs_f64(),
        },
        Err(err) => CertificationResult {
            certified: false,
            clean_correct: true,
            margins: None,
            diagnostic: Some(err.to_string()),
            elapsed_secs: start.elapsed().as_secs_f64(),
        },
    }
}

#[derive(Debug, Clone)]
pub struct CertificationReport {
    pub results: Vec<CertificationResult>,
    pub certified_accuracy: f64,
    pub clean_accuracy: f64,
    pub total_secs: f64,
}

/// Certifies every sample (in parallel where available, results in dataset
/// order) and aggregates the certified fraction.
pub fn certified_accuracy(
    model: &Model<f64>,
    dataset: &[Sample],
    spec: &PerturbationSpec,
    domain: DomainKind,
) -> CertificationReport {
    assert!(!dataset.is_empty(), "empty dataset");
    let start = Instant::now();
    let results = parallel::map_indexed(dataset, |_, sample| certify(model, sample, spec, domain));
    let n = dataset.len() as f64;
    let certified = results.iter().filter(|r| r.certified).count() as f64;
    let clean = results.iter().filter(|r| r.clean_correct).count() as f64;
    CertificationReport {
        results,
        certified_accuracy: certified / n,
        clean_accuracy: clean / n,
        total_secs: start.elapsed().as_secs_f64(),
    }
}

#[derive(Debug, Clone)]
pub struct RadiusResult {
    /// Largest radius (within tolerance) at which certification succeeds;
    /// zero when the sample cannot be certified at all.
    pub radius: f64,
    pub certified_at_zero: bool,
}

/// Bisection for the maximal certified radius, assuming certification is
/// monotone in epsilon (input domains are nested).
pub fn max_certified_radius(
    model: &Model<f64>,
    sample: &Sample,
    strategy: Strategy,
    domain: DomainKind,
    hi: f64,
    tol: f64,
) -> RadiusResult {
    assert!(tol > 0.0, "tolerance must be positive");
    let check = |eps: f64| {
        certify(
            model,
            sample,
            &PerturbationSpec { epsilon: eps, strategy },
            domain,
        )
        .certified
    };
    if !check(0.0) {
        return RadiusResult {
            radius: 0.0,
            certified_at_zero: false,
        };
    }
    if hi <= 0.0 {
        return RadiusResult {
            radius: 0.0,
            certified_at_zero: true,
        };
    }
    if check(hi) {
        return RadiusResult {
            radius: hi,
            certified_at_zero: true,
        };
    }
    let mut lo = 0.0;
    let mut hi = hi;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if check(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    RadiusResult {
        radius: lo,
        certified_at_zero: true,
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub sample_index: usize,
    pub zonotope_certified: bool,
    pub interzono_certified: bool,
    pub zonotope_secs: f64,
    pub interzono_secs: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub zonotope_certified_accuracy: f64,
    pub interzono_certified_accuracy: f64,
    pub clean_accuracy: f64,
    pub zonotope_secs: f64,
    pub interzono_secs: f64,
}

/// Runs both pipelines on identical inputs and reports paired outcomes.
pub fn compare_domains(
    model: &Model<f64>,
    dataset: &[Sample],
    spec: &PerturbationSpec,
) -> ComparisonReport {
    assert!(!dataset.is_empty(), "empty dataset");
    let paired = parallel::map_indexed(dataset, |i, sample| {
        let z = certify(model, sample, spec, DomainKind::Zonotope);
        let d = certify(model, sample, spec, DomainKind::InterZono);
        (i, z, d)
    });
    let n = dataset.len() as f64;
    let mut rows = Vec::with_capacity(dataset.len());
    let (mut zc, mut dc, mut clean, mut zt, mut dt) = (0usize, 0usize, 0usize, 0.0f64, 0.0f64);
    for (i, z, d) in paired {
        zc += z.certified as usize;
        dc += d.certified as usize;
        clean += z.clean_correct as usize;
        zt += z.elapsed_secs;
        dt += d.elapsed_secs;
        rows.push(ComparisonRow {
            sample_index: i,
            zonotope_certified: z.certified,
            interzono_certified: d.certified,
            zonotope_secs: z.elapsed_secs,
            interzono_secs: d.elapsed_secs,
        });
    }
    ComparisonReport {
        rows,
        zonotope_certified_accuracy: zc as f64 / n,
        interzono_certified_accuracy: dc as f64 / n,
        clean_accuracy: clean as f64 / n,
        zonotope_secs: zt,
        interzono_secs: dt,
    }
}
