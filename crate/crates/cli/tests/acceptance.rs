use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use macrostate::correlations::{discord_vanishing_test, locally_macro_state, observational_discord};
use macrostate::entropy::{binary_entropy, observational_deficit, observational_entropy, von_neumann_entropy};
use macrostate::evolve::macro_entropy_chain;
use macrostate::mppp::{brute_force_mppp, compute_mppp, fixed_point_space_dim, macro_test, InferentialFrame};
use macrostate::numerics::{ket, ComplexMatrix, C64};
use macrostate::quantum::{Channel, DensityMatrix, Povm};
use macrostate::random::{
    random_block_projectors, random_channel, random_composition, random_density_matrix, random_frame_inputs,
    random_frame_kind, random_probability, seeded, FrameKind, SeededRng,
};
use macrostate::resources::{
    classify_channel, mno_counterexample, rel_ent_microscopicity, scenario_coherence, smeared_qubit_povm, FreeStateSet,
};
use macrostate::retrodiction::{cesaro_checkpoints, petz_map};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_frame(rng: &mut SeededRng, dims: std::ops::RangeInclusive<usize>, max_outcomes: usize) -> InferentialFrame {
    let d = rng.random_range(dims);
    let kind = random_frame_kind(rng);
    let (p, g) = random_frame_inputs(d, max_outcomes, kind, rng);
    compute_mppp(&p, &g).expect("random frame")
}

fn mppp_oracle() -> Outcome {
    let mut rng = seeded(101);
    let start = Instant::now();
    let mut mismatches = 0;
    let n = 200;
    for _ in 0..n {
        let d = rng.random_range(2..=4);
        let (p, g) = random_frame_inputs(d, 5, random_frame_kind(&mut rng), &mut rng);
        let fast = compute_mppp(&p, &g).unwrap();
        if brute_force_mppp(&p, &g).unwrap() != *fast.partition() {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 60.0,
        format!("{n} frames, {mismatches} mismatches, {secs:.2} s"),
    )
}

fn consensus() -> Outcome {
    let mut rng = seeded(102);
    let (mut constructed_ok, mut generic_ok, mut violations) = (0, 0, 0);
    let n = 100;
    for _ in 0..n {
        let f = random_frame(&mut rng, 2..=4, 5);
        let w = random_probability(f.num_macrostates(), &mut rng);
        let terms: Vec<(f64, &DensityMatrix)> = w.iter().copied().zip(f.extreme_points()).collect();
        let m = DensityMatrix::mixture(&terms).unwrap();
        match macro_test(&m, &f) {
            Ok(r) if r.verdict && r.deficit_zero && r.cg_fixed && r.rdm_fixed && r.decomposition_holds => constructed_ok += 1,
            Ok(_) => {}
            Err(_) => violations += 1,
        }
        let generic = random_density_matrix(f.dim(), &mut rng);
        match macro_test(&generic, &f) {
            Ok(r) if !r.verdict && !r.deficit_zero && !r.cg_fixed && !r.rdm_fixed && !r.decomposition_holds => generic_ok += 1,
            Ok(_) => {}
            Err(_) => violations += 1,
        }
    }
    outcome(
        constructed_ok == n && generic_ok == n && violations == 0,
        format!("constructed {constructed_ok}/{n} all true, generic {generic_ok}/{n} all false, {violations} violations"),
    )
}

fn hadamard() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_row_slice(2, 2, &[s, s, s, -s].map(|x| C64::new(x, 0.0)))
}

fn counterexamples() -> Outcome {
    let u = DensityMatrix::maximally_mixed(2);
    let f = compute_mppp(&smeared_qubit_povm(2.0 / 3.0).unwrap(), &u).unwrap();
    let replacement = f.rdm().map().distance(Channel::replacement(2, &u).map());
    let h = classify_channel(&Channel::unitary(&hadamard()).unwrap(), &f).unwrap();
    let a = f.is_trivial() && replacement < 1e-12 && !h.is_cco && h.is_rco;

    let mut frames = vec![scenario_coherence(2).unwrap(), scenario_coherence(3).unwrap()];
    let mut rng = seeded(103);
    while frames.len() < 12 {
        let f = random_frame(&mut rng, 2..=4, 5);
        if f.num_macrostates() >= 2 {
            frames.push(f);
        }
    }
    let mut b_ok = 0;
    for f in &frames {
        let e = mno_counterexample(f, None, 0, 1).unwrap();
        let c = classify_channel(&e, f).unwrap();
        if c.is_mno && !c.is_rco {
            b_ok += 1;
        }
    }
    outcome(
        a && b_ok == frames.len(),
        format!(
            "(a) trivial {}, |Δ − Tr[·]u| {replacement:.1e}, Hadamard cco {} rco {}; (b) {b_ok}/{} frames mno ∧ ¬rco",
            f.is_trivial(),
            h.is_cco,
            h.is_rco,
            frames.len()
        ),
    )
}

fn fixed_points() -> Outcome {
    let mut rng = seeded(104);
    let n = 60;
    let mut ok = 0;
    for _ in 0..n {
        let f = random_frame(&mut rng, 2..=4, 5);
        if fixed_point_space_dim(&f.cg().channel().adjoint()).unwrap() == f.num_macrostates() {
            ok += 1;
        }
    }
    outcome(ok == n, format!("{ok}/{n} frames match |Y|"))
}

fn cesaro() -> Outcome {
    // Changes below the default absolute tolerance count as ties.
    const TIE: f64 = 1e-10;
    let mut rng = seeded(105);
    let n = 60;
    let (mut below, mut monotone, mut worst, mut rise) = (0, 0, 0.0f64, 0.0f64);
    for _ in 0..n {
        let f = random_frame(&mut rng, 2..=4, 5);
        let avgs = cesaro_checkpoints(f.cg().channel(), &[10, 100, 1000]).unwrap();
        let d: Vec<f64> = avgs.iter().map(|a| a.map().distance(f.rdm().map())).collect();
        worst = worst.max(d[2]);
        if d[2] < 1e-3 {
            below += 1;
        }
        rise = rise.max(d[1] - d[0]).max(d[2] - d[1]);
        if d[1] <= d[0] + TIE && d[2] <= d[1] + TIE {
            monotone += 1;
        }
    }
    outcome(
        below == n && monotone == n,
        format!("n=1000 below 1e-3 on {below}/{n}, monotone on {monotone}/{n}, worst distance {worst:.2e}, largest rise {rise:.2e}"),
    )
}

fn entropic_inequalities() -> Outcome {
    let mut rng = seeded(106);
    let n = 500;
    let (mut min_deficit, mut min_gap, mut min_bound) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..n {
        let f = random_frame(&mut rng, 2..=4, 5);
        let rho = random_density_matrix(f.dim(), &mut rng);
        let deficit = observational_deficit(&rho, f.prior(), f.povm()).unwrap().value;
        min_deficit = min_deficit.min(deficit);
        let gap = observational_entropy(&rho, f.povm()).unwrap().value - von_neumann_entropy(&rho).value;
        min_gap = min_gap.min(gap);
        let micro = rel_ent_microscopicity(&rho, &f).unwrap().value;
        let p = f.povm().clone();
        let free = FreeStateSet::new(f).unwrap();
        for _ in 0..10 {
            let sigma = free.sample(&mut rng);
            let d = observational_deficit(&rho, &sigma, &p).unwrap().value;
            min_bound = min_bound.min(micro - d);
        }
    }
    outcome(
        min_deficit >= -1e-9 && min_gap >= -1e-9 && min_bound >= -1e-8,
        format!("{n} samples; min deficit {min_deficit:.2e}, min S_P − S {min_gap:.2e}, min D(ρ‖Δρ) − δ {min_bound:.2e}"),
    )
}

fn macro_chain() -> Outcome {
    let mut rng = seeded(107);
    let n = 150;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let d = rng.random_range(2..=5);
        let parts = rng.random_range(1..=d);
        let sizes = random_composition(d, parts, &mut rng);
        let pi = Povm::new(random_block_projectors(&sizes, &mut rng)).unwrap();
        let rho = random_density_matrix(d, &mut rng);
        let (a, b, c) = macro_entropy_chain(&rho, &pi).unwrap();
        worst = worst.max((a - b).abs()).max((b - c).abs());
    }
    outcome(worst <= 1e-9, format!("{n} pairs, worst gap {worst:.2e}"))
}

/// Channels that preserve the prior, so a good share of them land in MNO.
fn hierarchy_channel(f: &InferentialFrame, rng: &mut SeededRng) -> Channel {
    let d = f.dim();
    let e = random_channel(d, d, rng.random_range(1..=3), rng);
    match rng.random_range(0..4) {
        0 => e,
        1 => petz_map(&e, f.prior()).unwrap().compose(&e).unwrap(),
        2 => f.rdm().compose(&e).unwrap(),
        _ => f.rdm().compose(&e).unwrap().compose(f.rdm()).unwrap(),
    }
}

fn hierarchy() -> Outcome {
    let mut rng = seeded(108);
    let frames_n = 24;
    let per = 100;
    let (mut violations, mut trivial_violations, mut trivial_frames) = (0, 0, 0);
    let mut counts = [0usize; 3];
    for k in 0..frames_n {
        let f = if k % 4 == 0 {
            let d = rng.random_range(2..=3);
            let (p, g) = random_frame_inputs(d, 4, FrameKind::Generic, &mut rng);
            compute_mppp(&p, &g).unwrap()
        } else {
            let d = rng.random_range(2..=3);
            let kind = if k % 2 == 0 { FrameKind::ProportionalSplit } else { FrameKind::Block };
            let (p, g) = random_frame_inputs(d, 4, kind, &mut rng);
            compute_mppp(&p, &g).unwrap()
        };
        if f.is_trivial() {
            trivial_frames += 1;
        }
        for _ in 0..per {
            let e = hierarchy_channel(&f, &mut rng);
            match classify_channel(&e, &f) {
                Ok(c) => {
                    counts[0] += c.is_cco as usize;
                    counts[1] += c.is_rco as usize;
                    counts[2] += c.is_mno as usize;
                    if (c.is_cco && !c.is_rco) || (c.is_rco && !c.is_mno) {
                        violations += 1;
                    }
                    if f.is_trivial() && c.is_mno && !c.is_rco {
                        trivial_violations += 1;
                    }
                }
                Err(_) => violations += 1,
            }
        }
    }
    outcome(
        violations == 0 && trivial_violations == 0 && trivial_frames > 0,
        format!(
            "{frames_n} frames × {per} channels ({} cco, {} rco, {} mno), {violations} violations; \
             {trivial_frames} trivial frames, {trivial_violations} mno without rco",
            counts[0], counts[1], counts[2]
        ),
    )
}

fn bell() -> DensityMatrix {
    let v = (ket(4, 0) + ket(4, 3)) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    DensityMatrix::pure(&v).unwrap()
}

fn discord_suite() -> Outcome {
    let z = Povm::basis(2);
    let bell_discord = observational_discord(&bell(), &z, (2, 2)).unwrap().discord.value;
    let mut rng = seeded(109);
    let mut worst_product = 0.0f64;
    for _ in 0..50 {
        let (da, db) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let rho = random_density_matrix(da, &mut rng).tensor(&random_density_matrix(db, &mut rng));
        let (p, _) = random_frame_inputs(da, 4, random_frame_kind(&mut rng), &mut rng);
        let v = observational_discord(&rho, &p, (da, db)).unwrap().discord.value;
        worst_product = worst_product.max(v.abs());
    }
    let n = 100;
    let (mut constructed_ok, mut generic_ok, mut violations) = (0, 0, 0);
    for _ in 0..n {
        let (da, db) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let (p, g) = random_frame_inputs(da, 4, random_frame_kind(&mut rng), &mut rng);
        let frame = compute_mppp(&p, &g).unwrap();
        let w = random_probability(frame.num_macrostates(), &mut rng);
        let taus: Vec<DensityMatrix> = (0..w.len()).map(|_| random_density_matrix(db, &mut rng)).collect();
        let rho = locally_macro_state(&frame, &w, &taus).unwrap();
        match discord_vanishing_test(&rho, &p, (da, db)) {
            Ok(r) if r.verdict && r.cg_fixed && r.rdm_fixed && r.decomposition_holds => constructed_ok += 1,
            Ok(_) => {}
            Err(_) => violations += 1,
        }
        let generic = random_density_matrix(da * db, &mut rng);
        match discord_vanishing_test(&generic, &p, (da, db)) {
            Ok(r) if !r.verdict && !r.cg_fixed && !r.rdm_fixed && !r.decomposition_holds => generic_ok += 1,
            Ok(_) => {}
            Err(_) => violations += 1,
        }
    }
    outcome(
        (bell_discord - 1.0).abs() <= 1e-8 && worst_product <= 1e-9 && constructed_ok == n && generic_ok == n && violations == 0,
        format!(
            "Bell {bell_discord:.10}, worst product {worst_product:.1e}, constructed {constructed_ok}/{n}, \
             generic {generic_ok}/{n}, {violations} violations"
        ),
    )
}

fn evolution_demo() -> Outcome {
    let fixture = |n: &str| format!("{}/tests/fixtures/{n}", env!("CARGO_MANIFEST_DIR"));
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_macrostate"))
        .args(["evolve", "--povm", &fixture("z_pvm.json"), "--prior", &fixture("uniform_qubit.json")])
        .args(["--hamiltonian", &fixture("sigma_x.json"), "--t-max", "3.141592653589793"])
        .args(["--steps", "100", "--macro-weights", "1,0"])
        .output()
        .expect("binary runs");
    let secs = start.elapsed().as_secs_f64();
    if !out.status.success() {
        return outcome(false, String::from_utf8_lossy(&out.stderr).to_string());
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    let (mut worst_obs, mut s_min, mut s_max) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for r in &rows {
        let c = r[0].cos();
        worst_obs = worst_obs.max((r[2] - binary_entropy(c * c)).abs());
        s_min = s_min.min(r[1]);
        s_max = s_max.max(r[1]);
    }
    let spread = s_max - s_min;
    outcome(
        rows.len() == 100 && worst_obs <= 1e-8 && spread <= 1e-8 && secs < 10.0,
        format!(
            "{} points, worst |S_P − h(cos²t)| {worst_obs:.1e}, S spread {spread:.1e}, {secs:.2} s",
            rows.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("mppp oracle equivalence", mppp_oracle),
        ("four-way macroscopicity consensus", consensus),
        ("counterexamples", counterexamples),
        ("fixed-point dimension", fixed_points),
        ("cesaro convergence", cesaro),
        ("entropic inequalities", entropic_inequalities),
        ("macro-state entropy chain", macro_chain),
        ("channel hierarchy", hierarchy),
        ("discord suite", discord_suite),
        ("evolution demo", evolution_demo),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!("{} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
        failed += !result.pass as usize;
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
