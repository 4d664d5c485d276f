//! Central finite-difference check of tape gradients.

use rand::seq::index::sample;

use crate::error::Result;
use crate::init::named_rng;
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub h: f64,
    /// Coordinates sampled per parameter (all of them when the parameter is smaller).
    pub coords_per_param: usize,
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so gradients that are
    /// numerically zero compare on absolute error.
    pub denom_floor: f64,
    pub seed: u64,
    /// Use the five-point stencil (error `O(h^4)`) instead of the
    /// two-point central difference (error `O(h^2)`).
    pub five_point: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            h: 1e-5,
            coords_per_param: 32,
            tolerance: 1e-5,
            denom_floor: 1e-4,
            seed: 0,
            five_point: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub params: Vec<ParamReport>,
    pub max_rel_err: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&ParamReport> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares analytic gradients of the scalar built by `forward` against
/// central differences, for every parameter in `store`.
pub fn grad_check<S, F>(store: &mut ParamStore<S>, forward: F, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    S: Scalar,
    F: for<'a> Fn(&mut Tape<'a, S>, &'a ParamStore<S>) -> Result<Var>,
{
    let ids: Vec<ParamId> = store.ids().collect();
    grad_check_params(store, &ids, forward, cfg)
}

/// Like [`grad_check`] restricted to `ids`.
pub fn grad_check_params<S, F>(
    store: &mut ParamStore<S>,
    ids: &[ParamId],
    forward: F,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    S: Scalar,
    F: for<'a> Fn(&mut Tape<'a, S>, &'a ParamStore<S>) -> Result<Var>,
{
    let eval = |store: &ParamStore<S>| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = forward(&mut tape, store)?;
        Ok(tape.value(loss).item().as_f64())
    };

    let analytic: Vec<Option<Vec<S>>> = {
        let mut tape = Tape::new();
        let loss = forward(&mut tape, store)?;
        let grads = tape.backward(loss)?;
        let mut per_param: Vec<Option<Vec<S>>> = vec![None; store.len()];
        for &id in ids {
            let g = grads
                .param_grad(id)
                .map(|t| t.into_data())
                .unwrap_or_else(|| vec![S::zero(); store.get(id).value.len()]);
            per_param[id.0] = Some(g);
        }
        per_param
    };

    let mut rng = named_rng(cfg.seed, "grad_check");
    let h = S::lit(cfg.h);
    let mut reports = Vec::with_capacity(ids.len());
    for &id in ids {
        let n = store.get(id).value.len();
        let coords: Vec<usize> = if n <= cfg.coords_per_param {
            (0..n).collect()
        } else {
            let mut v = sample(&mut rng, n, cfg.coords_per_param).into_vec();
            v.sort_unstable();
            v
        };
        let grad = analytic[id.0].as_ref().expect("requested parameter");
        let mut worst = 0.0f64;
        for &k in &coords {
            let orig = store.get(id).value.data()[k];
            let mut at = |offset: f64| -> Result<f64> {
                store.get_mut(id).value.data_mut()[k] = orig + h * S::lit(offset);
                let v = eval(store);
                store.get_mut(id).value.data_mut()[k] = orig;
                v
            };
            let numeric = if cfg.five_point {
                (8.0 * (at(1.0)? - at(-1.0)?) - (at(2.0)? - at(-2.0)?)) / (12.0 * cfg.h)
            } else {
                (at(1.0)? - at(-1.0)?) / (2.0 * cfg.h)
            };
            worst = worst.max(relative_error(grad[k].as_f64(), numeric, cfg.denom_floor));
        }
        reports.push(ParamReport {
            name: store.get(id).name.clone(),
            checked: coords.len(),
            max_rel_err: worst,
        });
    }
    let max_rel_err = reports.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    Ok(GradCheckReport {
        params: reports,
        max_rel_err,
        passed: max_rel_err < cfg.tolerance,
    })
}
