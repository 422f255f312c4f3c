//! Quantum kernel alignment.
//!
//! The encoding angles λ are chosen by `min_λ max_α F(α, λ)` where `F` is the
//! SVM dual objective on the Gram matrix `K_λ`. The inner maximization is the
//! SVC solver run to convergence; the outer minimization is SPSA.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spsa::{rademacher, spsa_probe, SpsaConfig};
use crate::error::{Error, Result};
use crate::featuremap::ParamVector;
use crate::gram::{GramMatrix, Kernel};
use crate::kernel_methods::svc_fit;
use crate::qkernel::KernelEngineConfig;

/// Maximized dual value `F(α*, λ)` with the maximizer.
#[derive(Clone, Debug, PartialEq)]
pub struct SvcLoss {
    pub loss: f64,
    pub alphas: Vec<f64>,
    pub support_count: usize,
}

pub fn svc_loss(k: &GramMatrix, y: &[f64], c: f64) -> Result<SvcLoss> {
    let model = svc_fit(k, y, c)?;
    Ok(SvcLoss {
        loss: model.dual_objective,
        support_count: model.support_count(),
        alphas: model.alphas,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Lowest objective evaluated during this iteration.
    pub loss_eval: f64,
    /// Best objective seen so far.
    pub loss_best: f64,
    /// Support vectors of the SVC behind `loss_eval`.
    pub support_vectors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentState {
    pub params_init: ParamVector,
    pub params_current: ParamVector,
    pub params_best: ParamVector,
    pub loss_init: f64,
    pub loss_best: f64,
    /// Entry 0 is the evaluation at the initial angles; entry `k` covers SPSA step `k - 1`.
    pub trace: Vec<TraceEntry>,
    pub iteration: usize,
}

impl AlignmentState {
    fn record(&mut self, iteration: usize, candidates: [(&[f64], &SvcLoss); 2]) {
        let (params, eval) = if candidates[1].1.loss < candidates[0].1.loss {
            candidates[1]
        } else {
            candidates[0]
        };
        if eval.loss < self.loss_best {
            self.loss_best = eval.loss;
            self.params_best = ParamVector(params.to_vec());
        }
        self.trace.push(TraceEntry {
            iteration,
            loss_eval: eval.loss,
            loss_best: self.loss_best,
            support_vectors: eval.support_count,
        });
    }
}

/// Runs SPSA on `λ ↦ max_α F(α, λ)`. The angles in `base` are ignored; the
/// search starts from `params_init`.
pub fn qka_align(
    base: &KernelEngineConfig,
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    spsa: &SpsaConfig,
    params_init: &ParamVector,
) -> Result<AlignmentState> {
    spsa.validate()?;
    base.feature_map.check_params(params_init)?;
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} points, {} labels", x.len(), y.len())));
    }
    let objective = |params: &[f64]| -> Result<SvcLoss> {
        let cfg = base.with_params(ParamVector(params.to_vec()));
        svc_loss(&cfg.gram(x)?, y, c)
    };

    let initial = objective(params_init.as_slice())?;
    let mut state = AlignmentState {
        params_init: params_init.clone(),
        params_current: params_init.clone(),
        params_best: params_init.clone(),
        loss_init: initial.loss,
        loss_best: initial.loss,
        trace: vec![TraceEntry {
            iteration: 0,
            loss_eval: initial.loss,
            loss_best: initial.loss,
            support_vectors: initial.support_count,
        }],
        iteration: 0,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spsa.seed);
    for k in 0..spsa.max_iter {
        let delta = rademacher(params_init.len(), &mut rng);
        let c_k = spsa.probe_gain(k);
        let a_k = spsa.step_gain(k);
        let mut evals: Vec<SvcLoss> = Vec::with_capacity(2);
        let probe = spsa_probe(
            |p| {
                let e = objective(p)?;
                let loss = e.loss;
                evals.push(e);
                Ok(loss)
            },
            state.params_current.as_slice(),
            c_k,
            &delta,
        )?;
        state.record(k + 1, [(&probe.plus, &evals[0]), (&probe.minus, &evals[1])]);
        for (p, g) in state.params_current.0.iter_mut().zip(&probe.gradient) {
            *p -= a_k * g;
        }
        state.iteration = k + 1;
    }
    Ok(state)
}
