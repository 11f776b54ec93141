//! Acceptance suite: one test per pinned behavioral guarantee, each checked
//! against an independent oracle or a hard numeric bound and reporting a
//! single `ACCEPTANCE <name>: PASS` line (visible with `--nocapture`).

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use cardioaug::augment::{
    apply_stack, build_spatial_affine, sample_stack, AugmentPolicy, ParameterRanges,
    TransformSpec,
};
use cardioaug::grid::{make_stream, Image2D, LabelMask2D, RandomStream, SeedSpec};
use cardioaug::losses::{run_gradient_suite, DEFAULT_LAMBDA};
use cardioaug::metrics::{dice, hausdorff, HdMode, MetricReport, Vendor};
use cardioaug::postprocess::{
    connected_components, remove_small_components, ComponentLabeling, Connectivity, LabelVolume,
};
use cardioaug::preprocess::{nlm_denoise, preprocess_slice, NlmParams, CANVAS};
use cardioaug_cli::commands::bench::{measure_rate, synthetic_pair};
use cardioaug_cli::commands::evaluate::{run_evaluate, EvaluateArgs};
use cardioaug_cli::commands::losscheck::{linearity_sweep, worked_examples};
use cardioaug_cli::commands::preprocess::{run_preprocess, PreprocessArgs};
use common::{hash_tree, make_dataset, make_mask_manifest};

fn pass(name: &str) {
    println!("ACCEPTANCE {name}: PASS");
}

#[test]
fn loss_examples_are_exact_and_gradients_match_finite_differences() {
    let t0 = Instant::now();

    for ex in worked_examples() {
        assert!(
            ex.passed,
            "{}: expected {} got {} (tolerance {})",
            ex.name, ex.expected, ex.actual, ex.tolerance
        );
    }

    let suite = run_gradient_suite(2024, 50);
    assert_eq!(suite.step, 1e-4);
    assert_eq!(suite.rel_tol, 1e-4);
    assert_eq!(suite.checks.len(), 4);
    for check in &suite.checks {
        assert_eq!(check.grids, 50);
        assert!(check.elements_checked > 0, "{} checked nothing", check.op);
        assert!(
            check.passed,
            "{}: max abs {} max rel {}",
            check.op, check.max_abs_err, check.max_rel_err
        );
    }
    assert!(suite.passed);

    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "loss suite took {elapsed:.2} s");
    pass("loss-kernels");
}

#[test]
fn composite_loss_is_affine_in_lambda() {
    assert_eq!(DEFAULT_LAMBDA, 0.5);
    let lin = linearity_sweep(2024);
    assert_eq!(lin.cases, 100);
    assert_eq!(lin.lambdas, vec![0.0, 0.25, 0.5, 1.0]);
    assert!(
        lin.max_abs_err <= 1e-12,
        "max linearity error {}",
        lin.max_abs_err
    );
    assert!(lin.passed);
    pass("composite-linearity");
}

#[test]
fn sampled_stacks_stay_inside_reference_ranges() {
    let policy = AugmentPolicy::default();
    let mut kind_seen = [false; 7];
    for epoch in 0..100_000u32 {
        let mut stream = policy.stream_for("acceptance", 0, epoch);
        let stack = sample_stack(&policy, &mut stream).unwrap();
        stack.validate_against(&ParameterRanges::REFERENCE).unwrap();
        let mut has_blur = false;
        let mut has_sharpen = false;
        for spec in stack.specs() {
            match *spec {
                TransformSpec::Blur { sigma } => {
                    has_blur = true;
                    kind_seen[0] = true;
                    assert!((0.1..=2.0).contains(&sigma), "sigma {sigma}");
                }
                TransformSpec::Sharpen { sigma, amount } => {
                    has_sharpen = true;
                    kind_seen[1] = true;
                    assert!((0.1..=2.0).contains(&sigma), "sigma {sigma}");
                    assert!((0.5..=1.5).contains(&amount), "amount {amount}");
                }
                TransformSpec::IntensityShift { delta } => {
                    kind_seen[2] = true;
                    assert!((-0.05..=0.05).contains(&delta), "delta {delta}");
                }
                TransformSpec::Gamma { gamma } => {
                    kind_seen[3] = true;
                    assert!((0.6..=1.7).contains(&gamma), "gamma {gamma}");
                }
                TransformSpec::Shear { m } => {
                    kind_seen[4] = true;
                    assert!((-0.1..=0.1).contains(&m), "shear {m}");
                }
                TransformSpec::Rotate { degrees } => {
                    kind_seen[5] = true;
                    assert!((-15.0..=15.0).contains(&degrees), "degrees {degrees}");
                }
                TransformSpec::Scale { m } => {
                    kind_seen[6] = true;
                    assert!((-0.1..=0.1).contains(&m), "scale {m}");
                }
            }
        }
        assert!(!(has_blur && has_sharpen), "blur and sharpen in one stack");
    }
    assert!(
        kind_seen.iter().all(|&s| s),
        "sampler never produced some transform kind: {kind_seen:?}"
    );
    pass("augmentation-ranges");
}

fn mask_centroid(mask: &LabelMask2D) -> Option<(f64, f64)> {
    let (mut n, mut sx, mut sy) = (0.0_f64, 0.0_f64, 0.0_f64);
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.get(r, c) != 0 {
                n += 1.0;
                sx += c as f64;
                sy += r as f64;
            }
        }
    }
    (n > 0.0).then_some((sx / n, sy / n))
}

#[test]
fn warped_mask_centroids_track_the_stack_affine() {
    let pair = synthetic_pair();
    let (cx, cy) = mask_centroid(&pair.mask).unwrap();
    let policy = AugmentPolicy::default();
    let total = 1000u32;
    let mut aligned = 0usize;
    for epoch in 0..total {
        let mut stream = policy.stream_for("alignment", 0, epoch);
        let stack = sample_stack(&policy, &mut stream).unwrap();
        let out = apply_stack(&pair, &stack).unwrap();

        let spatial: Vec<TransformSpec> = stack
            .specs()
            .iter()
            .copied()
            .filter(TransformSpec::is_spatial)
            .collect();
        let (ex, ey) = if spatial.is_empty() {
            (cx, cy)
        } else {
            // The composed affine is the pull map (output → input); the
            // content moves under its inverse.
            let pull =
                build_spatial_affine::<f64>(&spatial, pair.image.width(), pair.image.height())
                    .unwrap();
            pull.inverse().unwrap().apply(cx, cy)
        };
        let (ox, oy) = mask_centroid(&out.mask).expect("foreground survives");
        if ((ox - ex).powi(2) + (oy - ey).powi(2)).sqrt() <= 1.0 {
            aligned += 1;
        }
    }
    assert!(
        aligned as f64 / f64::from(total) >= 0.995,
        "only {aligned}/{total} centroids within 1 px"
    );
    pass("spatial-alignment");
}

#[test]
fn augment_binary_output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let raw = make_dataset(
        dir.path(),
        (48, 40),
        &[("s01", Vendor::A, true, 2), ("s02", Vendor::B, true, 1)],
    );
    let pre = dir.path().join("pre");
    run_preprocess(&PreprocessArgs {
        manifest: raw,
        config: None,
        out: pre.clone(),
        threads: Some(1),
        seed: None,
    })
    .unwrap();

    let bin = env!("CARGO_BIN_EXE_cardioaug");
    let run = |out: &Path, threads: &str| {
        let output = Command::new(bin)
            .arg("augment")
            .arg("--manifest")
            .arg(pre.join("manifest.json"))
            .args(["--epochs", "2", "--seed", "11", "--threads", threads])
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "augment --threads {threads}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };
    let single = dir.path().join("t1");
    let pooled = dir.path().join("t8");
    run(&single, "1");
    run(&pooled, "8");

    let tree = hash_tree(&single);
    // 3 slices × 2 epochs × 3 files, plus provenance.
    assert_eq!(tree.len(), 19);
    assert_eq!(tree, hash_tree(&pooled));
    pass("threaded-determinism");
}

/// Direct NLM cost: plain weighted average over the clipped search window
/// with half-sample-symmetric reflection for patch reads, quadratic in the
/// window with no incremental reuse.
fn nlm_reference(image: &Image2D<f64>, p: &NlmParams) -> Vec<f64> {
    let (w, h) = (image.width(), image.height());
    let reflect = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let period = 2 * n;
        let mut m = i % period;
        if m < 0 {
            m += period;
        }
        if m < n {
            m as usize
        } else {
            (period - 1 - m) as usize
        }
    };
    let at = |r: isize, c: isize| image.get(reflect(r, h), reflect(c, w));
    let lo = image.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = image
        .values()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let pr = p.patch_radius as isize;
    let sr = p.search_radius as isize;
    let patch_len = ((2 * pr + 1) * (2 * pr + 1)) as f64;

    let mut out = Vec::with_capacity(w * h);
    for row in 0..h as isize {
        for col in 0..w as isize {
            let mut num = 0.0;
            let mut den = 0.0;
            for qr in (row - sr).max(0)..=(row + sr).min(h as isize - 1) {
                for qc in (col - sr).max(0)..=(col + sr).min(w as isize - 1) {
                    let mut d2 = 0.0;
                    for dr in -pr..=pr {
                        for dc in -pr..=pr {
                            let diff = at(row + dr, col + dc) - at(qr + dr, qc + dc);
                            d2 += diff * diff;
                        }
                    }
                    d2 /= patch_len;
                    let weight = (-(d2 - 2.0 * p.sigma * p.sigma).max(0.0) / (p.h * p.h)).exp();
                    num += weight * at(qr, qc);
                    den += weight;
                }
            }
            out.push((num / den).clamp(lo, hi));
        }
    }
    out
}

#[test]
fn preprocess_yields_unit_canvas_and_matches_the_nlm_reference() {
    // Any input size lands on the exact canvas with unit-range values.
    let mut stream = make_stream(&SeedSpec::new(77, "acceptance/preprocess", 0, 0));
    for &(w, h) in &[(1usize, 1usize), (7, 5), (64, 80), (256, 256), (300, 277), (33, 501)] {
        let values: Vec<f64> = (0..w * h).map(|_| stream.random_range(0.0..1000.0)).collect();
        let image = Image2D::new(w, h, (1.25, 1.25), values).unwrap();
        let nlm = NlmParams::default_for(&image);
        let (out, _) = preprocess_slice(&image, None, &nlm).unwrap();
        assert_eq!((out.width(), out.height()), (CANVAS, CANVAS));
        assert!(out.is_unit_range(), "{w}x{h} output leaves [0, 1]");
    }

    // A mask rides along and keeps its labels when the slice is padded.
    let image = Image2D::new(64, 80, (1.25, 1.25), vec![0.5; 64 * 80]).unwrap();
    let mut labels = vec![0u8; 64 * 80];
    for r in 30..40 {
        for c in 20..30 {
            labels[r * 64 + c] = 2;
        }
    }
    let mask = LabelMask2D::new(64, 80, labels).unwrap();
    let nlm = NlmParams::default_for(&image);
    let (_, out_mask) = preprocess_slice(&image, Some(&mask), &nlm).unwrap();
    let out_mask = out_mask.unwrap();
    assert_eq!((out_mask.width(), out_mask.height()), (CANVAS, CANVAS));
    assert_eq!(out_mask.count(2), 100);

    // Constant slices normalize to exactly zero everywhere.
    let constant = Image2D::new(40, 30, (1.0, 1.0), vec![7.3; 1200]).unwrap();
    let nlm = NlmParams::default_for(&constant);
    let (out, _) = preprocess_slice(&constant, None, &nlm).unwrap();
    assert!(out.values().iter().all(|&v| v == 0.0));

    // Denoising agrees with the direct quadratic-cost reference.
    for case in 0..20u32 {
        let mut stream = make_stream(&SeedSpec::new(77, "acceptance/nlm", case, 0));
        let values: Vec<f64> = (0..15 * 15).map(|_| stream.random_range(0.0..1.0)).collect();
        let image = Image2D::new(15, 15, (1.0, 1.0), values).unwrap();
        let nlm = NlmParams::default_for(&image);
        let fast = nlm_denoise(&image, &nlm).unwrap();
        let slow = nlm_reference(&image, &nlm);
        for (i, (&a, &b)) in fast.values().iter().zip(&slow).enumerate() {
            assert!(
                (a - b).abs() <= 1e-6,
                "case {case} pixel {i}: {a} vs reference {b}"
            );
        }
    }
    pass("preprocess-conformance");
}

fn random_label_volume(stream: &mut RandomStream, max_dim: usize) -> LabelVolume {
    let d = stream.random_range(1..=max_dim);
    let h = stream.random_range(1..=max_dim);
    let w = stream.random_range(1..=max_dim);
    random_label_volume_with_dims(stream, d, h, w)
}

fn random_label_volume_with_dims(
    stream: &mut RandomStream,
    d: usize,
    h: usize,
    w: usize,
) -> LabelVolume {
    let slices = (0..d)
        .map(|_| {
            let labels = (0..h * w)
                .map(|_| {
                    if stream.random_bool(0.6) {
                        0
                    } else {
                        stream.random_range(1..=3u8)
                    }
                })
                .collect();
            LabelMask2D::new(w, h, labels).unwrap()
        })
        .collect();
    LabelVolume::new(slices, (2.0, 1.25, 1.25)).unwrap()
}

fn oracle_offsets(conn: Connectivity) -> Vec<(i32, i32, i32)> {
    let mut out = Vec::new();
    for ds in -1..=1i32 {
        for dr in -1..=1i32 {
            for dc in -1..=1i32 {
                if (ds, dr, dc) == (0, 0, 0) {
                    continue;
                }
                match conn {
                    Connectivity::TwoD8 if ds != 0 => {}
                    _ => out.push((ds, dr, dc)),
                }
            }
        }
    }
    out
}

/// Flood-fill partition of class `cls`, compared against the library's
/// labeling as an id bijection with identical component sizes.
fn assert_partition_matches(
    vol: &LabelVolume,
    cls: u8,
    conn: Connectivity,
    labeling: &ComponentLabeling,
) {
    let (d, h, w) = (vol.depth(), vol.height(), vol.width());
    let idx = |s: usize, r: usize, c: usize| (s * h + r) * w + c;
    let offsets = oracle_offsets(conn);

    let mut oracle = vec![0u32; d * h * w];
    let mut sizes = Vec::new();
    for s in 0..d {
        for r in 0..h {
            for c in 0..w {
                if vol.get(s, r, c) != cls || oracle[idx(s, r, c)] != 0 {
                    continue;
                }
                let id = sizes.len() as u32 + 1;
                let mut queue = vec![(s, r, c)];
                oracle[idx(s, r, c)] = id;
                let mut size = 0usize;
                while let Some((qs, qr, qc)) = queue.pop() {
                    size += 1;
                    for &(ds, dr, dc) in &offsets {
                        let (ns, nr, nc) =
                            (qs as i32 + ds, qr as i32 + dr, qc as i32 + dc);
                        if ns < 0
                            || nr < 0
                            || nc < 0
                            || ns >= d as i32
                            || nr >= h as i32
                            || nc >= w as i32
                        {
                            continue;
                        }
                        let (ns, nr, nc) = (ns as usize, nr as usize, nc as usize);
                        if vol.get(ns, nr, nc) == cls && oracle[idx(ns, nr, nc)] == 0 {
                            oracle[idx(ns, nr, nc)] = id;
                            queue.push((ns, nr, nc));
                        }
                    }
                }
                sizes.push(size);
            }
        }
    }

    assert_eq!(labeling.sizes.len(), sizes.len(), "component count differs");
    let mut fwd = vec![0u32; sizes.len() + 1];
    for (i, (&o, &l)) in oracle.iter().zip(&labeling.ids).enumerate() {
        assert_eq!(o == 0, l == 0, "foreground/background mismatch at {i}");
        if o != 0 {
            if fwd[o as usize] == 0 {
                fwd[o as usize] = l;
            }
            assert_eq!(fwd[o as usize], l, "component split or merged at {i}");
        }
    }
    let mut seen = vec![false; sizes.len() + 1];
    for (o, &l) in fwd.iter().enumerate().skip(1) {
        assert!(l != 0 && !seen[l as usize], "ids are not a bijection");
        seen[l as usize] = true;
        assert_eq!(labeling.sizes[l as usize - 1], sizes[o - 1], "size differs");
    }
}

#[test]
fn component_threshold_is_strict_and_labeling_matches_the_oracle() {
    // Exactly 29 voxels vanish while exactly 30 survive.
    let mut labels = vec![0u8; 60 * 40];
    for item in labels.iter_mut().take(29) {
        *item = 1;
    }
    for r in 10..15 {
        for c in 0..6 {
            labels[r * 40 + c] = 1;
        }
    }
    let slice = LabelMask2D::new(40, 60, labels).unwrap();
    let vol = LabelVolume::single(slice, (9.0, 1.25, 1.25)).unwrap();
    for conn in [Connectivity::TwoD8, Connectivity::ThreeD26] {
        let (cleaned, report) = remove_small_components(&vol, 30, conn).unwrap();
        assert_eq!(cleaned.count(1), 30, "{conn:?}");
        assert_eq!(report.removed_voxels(), 29, "{conn:?}");
        let (again, report2) = remove_small_components(&cleaned, 30, conn).unwrap();
        assert_eq!(again, cleaned, "{conn:?} not idempotent");
        assert_eq!(report2.removed_voxels(), 0);
    }

    // Labeling agrees with a flood-fill oracle on random volumes.
    for case in 0..100u32 {
        let mut stream = make_stream(&SeedSpec::new(9, "acceptance/components", case, 0));
        let vol = random_label_volume(&mut stream, 16);
        for conn in [Connectivity::TwoD8, Connectivity::ThreeD26] {
            for cls in 1..=3u8 {
                let labeling = connected_components(&vol, cls, conn).unwrap();
                assert_partition_matches(&vol, cls, conn, &labeling);
            }
        }
    }
    pass("postprocess-threshold");
}

fn dice_oracle(pred: &LabelVolume, truth: &LabelVolume, cls: u8) -> f64 {
    let (mut inter, mut p, mut t) = (0u64, 0u64, 0u64);
    for s in 0..pred.depth() {
        for r in 0..pred.height() {
            for c in 0..pred.width() {
                let a = pred.get(s, r, c) == cls;
                let b = truth.get(s, r, c) == cls;
                p += u64::from(a);
                t += u64::from(b);
                inter += u64::from(a && b);
            }
        }
    }
    if p + t == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (p + t) as f64
    }
}

/// Class boundary in millimetres: foreground voxels with a face neighbour
/// outside the class (in-plane faces only for single-slice volumes),
/// out-of-bounds counting as background.
fn boundary_oracle(vol: &LabelVolume, cls: u8) -> Vec<[f64; 3]> {
    let (d, h, w) = (vol.depth(), vol.height(), vol.width());
    let (sm, rm, cm) = vol.spacing();
    let mut faces = vec![(0i32, -1i32, 0i32), (0, 1, 0), (0, 0, -1), (0, 0, 1)];
    if d > 1 {
        faces.push((-1, 0, 0));
        faces.push((1, 0, 0));
    }
    let mut out = Vec::new();
    for s in 0..d {
        for r in 0..h {
            for c in 0..w {
                if vol.get(s, r, c) != cls {
                    continue;
                }
                let exposed = faces.iter().any(|&(ds, dr, dc)| {
                    let (ns, nr, nc) = (s as i32 + ds, r as i32 + dr, c as i32 + dc);
                    ns < 0
                        || nr < 0
                        || nc < 0
                        || ns >= d as i32
                        || nr >= h as i32
                        || nc >= w as i32
                        || vol.get(ns as usize, nr as usize, nc as usize) != cls
                });
                if exposed {
                    out.push([s as f64 * sm, r as f64 * rm, c as f64 * cm]);
                }
            }
        }
    }
    out
}

/// All-pairs max-Hausdorff reference; mirrors the empty-set conventions.
fn hausdorff_max_oracle(pred: &LabelVolume, truth: &LabelVolume, cls: u8) -> (f64, bool) {
    let a = boundary_oracle(pred, cls);
    let b = boundary_oracle(truth, cls);
    if a.is_empty() && b.is_empty() {
        return (0.0, false);
    }
    if a.is_empty() || b.is_empty() {
        return (pred.diagonal_mm(), true);
    }
    let dist = |p: &[f64; 3], q: &[f64; 3]| {
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    };
    let directed = |from: &[[f64; 3]], to: &[[f64; 3]]| {
        from.iter()
            .map(|p| to.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0_f64, f64::max)
    };
    (directed(&a, &b).max(directed(&b, &a)), false)
}

#[test]
fn dice_and_hausdorff_match_brute_force_and_scale_with_spacing() {
    for case in 0..100u32 {
        let mut stream = make_stream(&SeedSpec::new(5, "acceptance/metrics", case, 0));
        let d = stream.random_range(1..=12);
        let h = stream.random_range(1..=12);
        let w = stream.random_range(1..=12);
        let pred = random_label_volume_with_dims(&mut stream, d, h, w);
        let truth = random_label_volume_with_dims(&mut stream, d, h, w);
        for cls in 1..=3u8 {
            assert_eq!(
                dice(&pred, &truth, cls).unwrap(),
                dice_oracle(&pred, &truth, cls),
                "case {case} class {cls}"
            );
            let got = hausdorff(&pred, &truth, cls, HdMode::Max).unwrap();
            let (want_mm, want_empty) = hausdorff_max_oracle(&pred, &truth, cls);
            assert_eq!(got.one_side_empty, want_empty, "case {case} class {cls}");
            assert!(
                (got.mm - want_mm).abs() <= 1e-9,
                "case {case} class {cls}: {} vs {want_mm}",
                got.mm
            );
        }
    }

    // Scaling the spacing by c scales HD by c and leaves Dice untouched.
    for case in 0..20u32 {
        let mut stream = make_stream(&SeedSpec::new(6, "acceptance/metric-scale", case, 0));
        let d = stream.random_range(1..=12);
        let h = stream.random_range(1..=12);
        let w = stream.random_range(1..=12);
        let pred = random_label_volume_with_dims(&mut stream, d, h, w);
        let truth = random_label_volume_with_dims(&mut stream, d, h, w);
        let c: f64 = stream.random_range(0.25..4.0);
        let (sm, rm, cm) = pred.spacing();
        let mut pred_scaled = pred.clone();
        pred_scaled.set_spacing((sm * c, rm * c, cm * c)).unwrap();
        let mut truth_scaled = truth.clone();
        truth_scaled.set_spacing((sm * c, rm * c, cm * c)).unwrap();
        for cls in 1..=3u8 {
            let base = hausdorff(&pred, &truth, cls, HdMode::Max).unwrap();
            let scaled = hausdorff(&pred_scaled, &truth_scaled, cls, HdMode::Max).unwrap();
            assert!(
                (scaled.mm - c * base.mm).abs() <= 1e-9,
                "case {case} class {cls}: {} vs {}",
                scaled.mm,
                c * base.mm
            );
            assert_eq!(
                dice(&pred_scaled, &truth_scaled, cls).unwrap(),
                dice(&pred, &truth, cls).unwrap()
            );
        }
    }
    pass("metric-oracles");
}

fn block_plane(h: usize, w: usize, label: u8, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Vec<Vec<u8>> {
    (0..h)
        .map(|r| {
            (0..w)
                .map(|c| {
                    if rows.contains(&r) && cols.contains(&c) {
                        label
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect()
}

#[test]
fn evaluate_report_matches_the_hand_computed_table() {
    let dir = tempfile::tempdir().unwrap();
    // Vendor A: prediction widens the true 2×2 block to 2×4 → Dice 8/12,
    // farthest boundary excess 2 columns × 1.25 mm = 2.50 mm.
    // Vendor B: exact match. Vendors C and D: predictions without truth.
    let myo = vec![block_plane(8, 8, 2, 2..5, 2..5)];
    let pred = make_mask_manifest(
        dir.path(),
        "pred",
        &[
            ("a1", Vendor::A, false, vec![block_plane(8, 8, 1, 0..2, 0..4)]),
            ("b1", Vendor::B, false, myo.clone()),
            ("c1", Vendor::C, false, vec![block_plane(8, 8, 1, 1..3, 1..3)]),
            ("d1", Vendor::D, false, vec![block_plane(8, 8, 3, 4..6, 4..6)]),
        ],
    );
    let truth = make_mask_manifest(
        dir.path(),
        "truth",
        &[
            ("a1", Vendor::A, true, vec![block_plane(8, 8, 1, 0..2, 0..2)]),
            ("b1", Vendor::B, true, myo),
            ("c1", Vendor::C, false, vec![]),
            ("d1", Vendor::D, false, vec![]),
        ],
    );

    let out = dir.path().join("eval");
    run_evaluate(&EvaluateArgs {
        manifest: pred,
        truth,
        config: None,
        out: out.clone(),
        postprocess: false,
        hd_mode: None,
        connectivity: None,
        min_voxels: None,
        method: None,
    })
    .unwrap();

    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "method,Dice_A_LV,Dice_A_MYO,Dice_A_RV,Dice_B_LV,Dice_B_MYO,Dice_B_RV,\
         Dice_C_LV,Dice_C_MYO,Dice_C_RV,Dice_D_LV,Dice_D_MYO,Dice_D_RV,\
         HD_A_LV,HD_A_MYO,HD_A_RV,HD_B_LV,HD_B_MYO,HD_B_RV,\
         HD_C_LV,HD_C_MYO,HD_C_RV,HD_D_LV,HD_D_MYO,HD_D_RV"
    );
    assert_eq!(
        lines[1],
        "ours,66.7,100.0,100.0,100.0,100.0,100.0,n/a,n/a,n/a,n/a,n/a,n/a,\
         2.50,0.00,0.00,0.00,0.00,0.00,n/a,n/a,n/a,n/a,n/a,n/a"
    );

    let report: MetricReport =
        serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.subjects_scored, [1, 1, 0, 0]);
    let dice_a_lv = report.dice_percent[0][0].unwrap();
    assert!((dice_a_lv - 200.0 / 3.0).abs() < 1e-9);
    assert_eq!(report.hd_mm[0][0], Some(2.5));
    pass("report-fidelity");
}

#[test]
fn augmentation_throughput_meets_the_floor() {
    // With one thread the overall rate is the per-core rate.
    let (pairs, elapsed, per_core) = measure_rate(1, 1.0).unwrap();
    assert!(pairs > 0);
    println!("bench: {pairs} pairs in {elapsed:.2} s, {per_core:.1} pairs/s/core");
    assert!(
        per_core >= 200.0,
        "augment throughput {per_core:.1} pairs/s/core below the 200 floor"
    );
    pass("augmentation-throughput");
}
