//! Finite-difference check of the full six-layer model and every head.

#[path = "support/full_model.rs"]
mod full_model;

use std::time::Instant;

#[test]
fn full_model_matches_finite_differences() {
    let start = Instant::now();
    let worst = full_model::check_sampled(50).unwrap();
    println!("max relative error {worst:e} in {:?}", start.elapsed());
    assert!(start.elapsed().as_secs() < 120);
}

#[test]
fn used_position_rows_match_finite_differences() {
    full_model::check_position_rows(5).unwrap();
}
