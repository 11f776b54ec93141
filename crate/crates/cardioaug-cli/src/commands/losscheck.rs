//! `losscheck`: run the loss kernels against their hand-computed examples,
//! the composite-linearity sweep, and finite-difference gradient checks on
//! seeded random grids, emitting a JSON verification report.

use std::path::PathBuf;

use clap::Args;
use rand::Rng;
use serde::Serialize;

use cardioaug::grid::{make_stream, AttentionMask, LabelMask2D, SeedSpec};
use cardioaug::losses::{
    attention_rec_loss, composite_rec_loss, masked_l1, plain_l1, run_gradient_suite,
    weighted_cross_entropy, ClassWeights, GradientSuite, LossValue, RealGrid,
};

use crate::error::{CliError, Result};
use crate::pngio::write_bytes_atomic;

#[derive(Debug, Args)]
pub struct LosscheckArgs {
    /// Seed for the random gradient-check grids.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random grids per gradient-checked operation.
    #[arg(long, default_value_t = 50)]
    pub grids: usize,
    /// Directory to write losscheck.json into (stdout only when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct ExampleCheck {
    pub name: &'static str,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl ExampleCheck {
    fn new(name: &'static str, expected: f64, actual: f64, tolerance: f64) -> Self {
        let passed = (actual - expected).abs() <= tolerance;
        Self {
            name,
            expected,
            actual,
            tolerance,
            passed,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LinearityCheck {
    pub cases: usize,
    pub lambdas: Vec<f64>,
    pub max_abs_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
struct LosscheckReport {
    seed: u64,
    examples: Vec<ExampleCheck>,
    linearity: LinearityCheck,
    gradients: GradientSuite,
    passed: bool,
}

pub fn run_losscheck(args: &LosscheckArgs) -> Result<()> {
    let examples = worked_examples();
    let linearity = linearity_sweep(args.seed);
    let gradients = run_gradient_suite(args.seed, args.grids);

    let passed = examples.iter().all(|e| e.passed) && linearity.passed && gradients.passed;
    let report = LosscheckReport {
        seed: args.seed,
        examples,
        linearity,
        gradients,
        passed,
    };

    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        write_bytes_atomic(&dir.join("losscheck.json"), json.as_bytes())?;
    }
    print!("{json}");

    if !report.passed {
        let failing: Vec<&str> = report
            .examples
            .iter()
            .filter(|e| !e.passed)
            .map(|e| e.name)
            .chain((!report.linearity.passed).then_some("composite_linearity"))
            .chain((!report.gradients.passed).then_some("gradient_suite"))
            .collect();
        return Err(CliError::CheckFailure(format!(
            "losscheck failed: {}",
            failing.join(", ")
        )));
    }
    Ok(())
}

fn grid(values: Vec<f64>, h: usize, w: usize) -> RealGrid<f64> {
    RealGrid::from_2d(h, w, values).expect("example grid is well-formed")
}

pub fn worked_examples() -> Vec<ExampleCheck> {
    let mut checks = Vec::new();

    // Masked L1 over a 2×2 grid: residuals (1, 0, 0, -0.5), mask keeps
    // elements 0, 2, 3 → (1 + 0 + 0.5) / 4 = 0.375.
    let x = grid(vec![1.0, 0.0, 0.5, 0.25], 2, 2);
    let x_rec = grid(vec![0.0, 0.0, 0.5, 0.75], 2, 2);
    let m = AttentionMask::new(2, 2, vec![1, 0, 1, 1]).unwrap();
    let masked = masked_l1(&x, &x_rec, &m).unwrap();
    checks.push(ExampleCheck::new("masked_l1_mean_over_all_elements", 0.375, masked.value, 0.0));

    // Plain L1 between opposite unit vectors: mean |residual| = 1.
    let y = grid(vec![0.0, 1.0], 1, 2);
    let y_rec = grid(vec![1.0, 0.0], 1, 2);
    let plain = plain_l1(&y, &y_rec).unwrap();
    checks.push(ExampleCheck::new("plain_l1_disjoint", 1.0, plain.value, 0.0));

    // An all-zero attention mask silences the source term exactly.
    let zero_mask = AttentionMask::new(2, 2, vec![0, 0, 0, 0]).unwrap();
    let silenced = masked_l1(&x, &x_rec, &zero_mask).unwrap();
    checks.push(ExampleCheck::new("masked_l1_zero_mask", 0.0, silenced.value, 0.0));
    let attn = attention_rec_loss(&x, &x_rec, &zero_mask, &y, &y).unwrap();
    checks.push(ExampleCheck::new("attention_zero_mask_and_equal_target", 0.0, attn.value, 0.0));

    // Composite with the default λ = 0.5: 1.0 + 0.5 · 0.5 = 1.25.
    let global = LossValue::<f64> { value: 1.0, gradient: None };
    let attention = LossValue::<f64> { value: 0.5, gradient: None };
    let composite = composite_rec_loss(&global, &attention, 0.5);
    checks.push(ExampleCheck::new("composite_default_lambda", 1.25, composite.value, 0.0));
    let composite0 = composite_rec_loss(&global, &attention, 0.0);
    checks.push(ExampleCheck::new("composite_lambda_zero", 1.0, composite0.value, 0.0));

    // Weighted cross-entropy examples.
    let w = ClassWeights::REFERENCE;
    // One-hot correct prediction → exactly zero loss.
    let one_hot = RealGrid::from_fn(1, 1, 4, |_, _, ch| if ch == 1 { 1.0 } else { 0.0 }).unwrap();
    let labels = LabelMask2D::new(1, 1, vec![1]).unwrap();
    let v = weighted_cross_entropy(&one_hot, &labels, &w).unwrap();
    checks.push(ExampleCheck::new("wce_one_hot_correct", 0.0, v.value, 0.0));

    // Uniform prediction on a true LV pixel: 0.24 · ln 4 ≈ 0.332711.
    let uniform = RealGrid::from_fn(1, 1, 4, |_, _, _| 0.25).unwrap();
    let v = weighted_cross_entropy(&uniform, &labels, &w).unwrap();
    checks.push(ExampleCheck::new("wce_uniform_lv", 0.332711, v.value, 5e-7));

    // Two pixels: a perfectly predicted background pixel and an RV pixel at
    // probability 1/2 → (0 + 0.26 · ln 2) / 2 ≈ 0.090110.
    let probs = RealGrid::from_fn(1, 2, 4, |_, c, ch| match (c, ch) {
        (0, 0) => 1.0,
        (1, 0) | (1, 3) => 0.5,
        _ => 0.0,
    })
    .unwrap();
    let labels = LabelMask2D::new(2, 1, vec![0, 3]).unwrap();
    let v = weighted_cross_entropy(&probs, &labels, &w).unwrap();
    checks.push(ExampleCheck::new("wce_two_pixel_mean", 0.090110, v.value, 1e-6));

    checks
}

/// Composite must be affine in λ: value(λ) = global + λ·attention exactly
/// (one multiply-add), checked on random loss pairs.
pub fn linearity_sweep(seed: u64) -> LinearityCheck {
    let lambdas = vec![0.0, 0.25, 0.5, 1.0];
    let mut stream = make_stream(&SeedSpec::new(seed, "losscheck/linearity", 0, 0));
    let cases = 100;
    let mut max_abs_err = 0.0_f64;
    for _ in 0..cases {
        let g: f64 = stream.random_range(0.0..10.0);
        let a: f64 = stream.random_range(0.0..10.0);
        let global = LossValue::<f64> { value: g, gradient: None };
        let attention = LossValue::<f64> { value: a, gradient: None };
        for &lam in &lambdas {
            let c = composite_rec_loss(&global, &attention, lam);
            max_abs_err = max_abs_err.max((c.value - (g + lam * a)).abs());
        }
    }
    let tolerance = 1e-12;
    LinearityCheck {
        cases,
        lambdas,
        max_abs_err,
        tolerance,
        passed: max_abs_err <= tolerance,
    }
}
