//! Finite-difference checks of every tape op over seeded random inputs.
//! Shared by the op tests and the acceptance suite.

use pw2ss_nn::gradcheck::{grad_check, GradCheckConfig};
use pw2ss_nn::init::{named_rng, uniform};
use pw2ss_nn::{ParamStore, Tape, Var};

pub type OpResult = Result<f64, String>;

fn cfg(seed: u64, tolerance: f64) -> GradCheckConfig {
    GradCheckConfig {
        tolerance,
        seed,
        ..Default::default()
    }
}

/// Reduces an op output to a scalar through fixed random weights so that
/// every output coordinate contributes a distinct amount.
fn probe<'p>(tape: &mut Tape<'p>, y: Var, seed: u64) -> pw2ss_nn::Result<Var> {
    let shape = tape.shape(y).to_vec();
    let mut rng = named_rng(seed, "probe");
    let w = tape.constant(uniform(&mut rng, &shape, 1.0));
    let p = tape.mul(y, w)?;
    Ok(tape.sum(p))
}

/// Worst relative error over `seeds` seeds of an op on parameters of the
/// given shapes; `Err` names the first failing seed.
pub fn check_op(
    name: &str,
    shapes: &[&[usize]],
    seeds: u64,
    tolerance: f64,
    op: impl Fn(&mut Tape<'_>, &[Var]) -> pw2ss_nn::Result<Var> + Copy,
) -> OpResult {
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut rng = named_rng(seed, name);
        let mut store = ParamStore::new();
        let ids: Vec<_> = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| store.add(&format!("p{i}"), uniform(&mut rng, s, 1.5)).unwrap())
            .collect();
        let report = grad_check(
            &mut store,
            |tape, store| {
                let vars: Vec<Var> = ids.iter().map(|&id| tape.param(store, id)).collect();
                let y = op(tape, &vars)?;
                probe(tape, y, seed)
            },
            &cfg(seed, tolerance),
        )
        .map_err(|e| format!("{name} seed {seed}: {e}"))?;
        if !report.passed {
            return Err(format!("{name} seed {seed}: {:?}", report.worst()));
        }
        worst = worst.max(report.max_rel_err);
    }
    Ok(worst)
}

/// Every op with its name, in a fixed order.
pub fn all_ops(seeds: u64, tolerance: f64) -> Vec<(&'static str, OpResult)> {
    let c = |name: &'static str, shapes: &[&[usize]], op: fn(&mut Tape<'_>, &[Var]) -> pw2ss_nn::Result<Var>| {
        (name, check_op(name, shapes, seeds, tolerance, op))
    };
    vec![
        c("matmul", &[&[3, 4], &[4, 5]], |t, v| t.matmul(v[0], v[1])),
        c("add", &[&[3, 4], &[4]], |t, v| t.add(v[0], v[1])),
        c("add_same", &[&[2, 3], &[2, 3]], |t, v| t.add(v[0], v[1])),
        c("sub", &[&[3, 4], &[4]], |t, v| t.sub(v[0], v[1])),
        c("mul", &[&[3, 4], &[3, 4]], |t, v| t.mul(v[0], v[1])),
        c("mul_bcast", &[&[3, 4], &[4]], |t, v| t.mul(v[0], v[1])),
        c("scale", &[&[3, 4]], |t, v| Ok(t.scale(v[0], -0.7))),
        c("softmax", &[&[3, 5]], |t, v| Ok(t.softmax(v[0]))),
        c("gelu", &[&[4, 4]], |t, v| Ok(t.gelu(v[0]))),
        c("sigmoid", &[&[6]], |t, v| Ok(t.sigmoid(v[0]))),
        c("transpose", &[&[2, 5]], |t, v| t.transpose(v[0])),
        c("reshape", &[&[2, 6]], |t, v| t.reshape(v[0], &[3, 4])),
        c("slice_cols", &[&[3, 6]], |t, v| t.slice_cols(v[0], 2, 3)),
        c("gather_rows", &[&[4, 3]], |t, v| t.gather_rows(v[0], &[2, 0, 2])),
        c("max_rows", &[&[5, 4]], |t, v| Ok(t.max_rows(v[0]))),
        c("mean", &[&[3, 3]], |t, v| Ok(t.mean(v[0]))),
        c("concat_cols", &[&[3, 4]], |t, v| {
            let a = t.slice_cols(v[0], 0, 1)?;
            t.concat_cols(&[v[0], a])
        }),
        c("concat_rows", &[&[2, 4]], |t, v| {
            let r = t.gather_rows(v[0], &[1])?;
            t.concat_rows(&[r, v[0]])
        }),
        c("linear", &[&[3, 4], &[4, 2], &[2]], |t, v| t.linear(v[0], v[1], v[2])),
        c("layer_norm", &[&[3, 6], &[6], &[6]], |t, v| t.layer_norm(v[0], v[1], v[2])),
        c("mse", &[&[3, 4], &[3, 4]], |t, v| t.mse_loss(v[0], v[1])),
        c("l2", &[&[3, 4], &[3, 4]], |t, v| t.l2_loss(v[0], v[1])),
        c("cross_entropy", &[&[3, 4]], |t, v| t.cross_entropy(v[0], &[1, 3, 0])),
        c("bce", &[&[4]], |t, v| t.bce_with_logits(v[0], &[1.0, 0.0, 0.0, 1.0])),
    ]
}
