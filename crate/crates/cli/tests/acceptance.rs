//! Acceptance checks. Runs as a plain binary and prints one line per
//! criterion; exits non-zero if any criterion fails.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hybrident::bell::{chsh_empirical, chsh_exact, paper_settings};
use hybrident::budget::RateBudget;
use hybrident::elements::*;
use hybrident::linalg::{self, c, CMatrix};
use hybrident::measurement::{fit_fringe, fringe_scan, rng_from_seed, stream_seed, Projector, StreamDomain};
use hybrident::source::{apply_noise, hybrid_state, hybrid_target, singlet, NoiseModel};
use hybrident::states::{basis_ket, project_to_physical, BasisLabel, DensityMatrix, Factor, Tensor};
use hybrident::tomography::*;
use rand::Rng;

const TWO_QUBIT: [Factor; 2] = [Factor::Polarization, Factor::OamO2];

type Criterion = (&'static str, fn() -> Outcome);

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

fn hybrid_of(noise: &NoiseModel) -> DensityMatrix {
    let rho = apply_noise(&singlet(), noise).unwrap();
    hybrid_state(&rho, TransferMode::Probabilistic).unwrap().state
}

fn werner_hybrid(p: f64) -> DensityMatrix {
    hybrid_of(&NoiseModel::werner(p).unwrap())
}

fn within_time(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (
        t < limit,
        format!("{:.3} s (limit {:.0} s)", t.as_secs_f64(), limit.as_secs_f64()),
    )
}

// 1 ----------------------------------------------------------------------

fn exact_pipeline_identity() -> Outcome {
    let start = Instant::now();
    let rho = hybrid_of(&NoiseModel::ideal());
    let data = TomographyData::expected(&rho, 100.0, 15.0).unwrap();
    let run = TomographyRun::reconstruct(data, Vec::new()).unwrap();
    let target = DensityMatrix::from_ket(&hybrid_target()).unwrap();
    let f = fidelity(&run.rho_mle, &hybrid_target()).unwrap();
    let conc = concurrence(&run.rho_mle).unwrap();
    let sl = linear_entropy(&run.rho_mle);
    let dist = (run.rho_mle.matrix() - target.matrix()).norm();
    let (fast, time) = within_time(start, Duration::from_secs(1));
    outcome(
        f >= 1.0 - 1e-9 && (conc - 1.0).abs() <= 1e-9 && sl.abs() <= 1e-9 && fast,
        format!("F = {f:.12}, C = {conc:.12}, S_L = {sl:.3e}, |ρ − ρ_target| = {dist:.1e}, {time}"),
    )
}

// 2 ----------------------------------------------------------------------

/// Brute-force metrics of `p |Φ⁻><Φ⁻| + (1−p) I/4`, `|Φ⁻> = (|00> − |11>)/√2`,
/// using only explicit real 4×4 arrays.
fn brute_force_werner(p: f64) -> (f64, f64, f64, f64) {
    let psi = [1.0 / SQRT_2, 0.0, 0.0, -1.0 / SQRT_2];
    let mut rho = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            rho[i][j] = p * psi[i] * psi[j] + if i == j { (1.0 - p) / 4.0 } else { 0.0 };
        }
    }
    let mul = |a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]| {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    m[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        m
    };
    let fid: f64 = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| psi[i] * rho[i][j] * psi[j])
        .sum();
    let r2 = mul(&rho, &rho);
    let purity: f64 = (0..4).map(|i| r2[i][i]).sum();
    let sl = 4.0 / 3.0 * (1.0 - purity);
    // σy⊗σy is real: [[0,0,0,−1],[0,0,1,0],[0,1,0,0],[−1,0,0,0]]; ρ is real
    let yy = [
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
    ];
    let r = mul(&rho, &mul(&yy, &mul(&rho, &yy)));
    // Bell-diagonal state: R is diagonal in the Bell basis
    let h = 1.0 / SQRT_2;
    let bell = [[h, 0.0, 0.0, h], [h, 0.0, 0.0, -h], [0.0, h, h, 0.0], [0.0, h, -h, 0.0]];
    let mut lam: Vec<f64> = bell
        .iter()
        .map(|b| {
            let mut v = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    v += b[i] * r[i][j] * b[j];
                }
            }
            v.max(0.0).sqrt()
        })
        .collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    let conc = (lam[0] - lam[1] - lam[2] - lam[3]).max(0.0);
    // S from Z/X on Alice and (Z ∓ X)/√2 on Bob
    let z = [[1.0, 0.0], [0.0, -1.0]];
    let x = [[0.0, 1.0], [1.0, 0.0]];
    let comb = |s: f64| [[h, s * h], [s * h, -h]];
    let corr = |a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]| {
        let mut t = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                t += rho[i][j] * a[j / 2][i / 2] * b[j % 2][i % 2];
            }
        }
        t
    };
    let (b, bp) = (comb(-1.0), comb(1.0));
    let s = corr(&z, &b) + corr(&x, &b) + corr(&z, &bp) - corr(&x, &bp);
    (fid, conc, sl, s)
}

fn werner_oracles() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut oracle_gap: f64 = 0.0;
    let settings = paper_settings();
    for p in [0.0, 0.25, 0.5, 0.887, 0.943, 1.0] {
        let closed = (
            (1.0 + 3.0 * p) / 4.0,
            ((3.0 * p - 1.0) / 2.0_f64).max(0.0),
            1.0 - p * p,
            2.0 * SQRT_2 * p,
        );
        let bf = brute_force_werner(p);
        oracle_gap = oracle_gap
            .max((bf.0 - closed.0).abs())
            .max((bf.1 - closed.1).abs())
            .max((bf.2 - closed.2).abs())
            .max((bf.3 - closed.3).abs());
        let rho = werner_hybrid(p);
        let data = TomographyData::expected(&rho, 100.0, 15.0).unwrap();
        let run = TomographyRun::reconstruct(data, Vec::new()).unwrap();
        let m = run.metrics().unwrap();
        let s = chsh_exact(&rho, &settings).unwrap().s;
        worst = worst
            .max((m.fidelity - closed.0).abs())
            .max((m.concurrence - closed.1).abs())
            .max((m.linear_entropy - closed.2).abs())
            .max((s - closed.3).abs());
    }
    outcome(
        worst <= 1e-8 && oracle_gap <= 1e-12,
        format!("max |pipeline − closed form| = {worst:.2e}, max |brute force − closed form| = {oracle_gap:.2e}"),
    )
}

// 3 ----------------------------------------------------------------------

fn chsh_values() -> Outcome {
    let start = Instant::now();
    let settings = paper_settings();
    let ideal = chsh_exact(&hybrid_of(&NoiseModel::ideal()), &settings).unwrap().s;
    let rho = werner_hybrid(0.887);
    let samples: Vec<f64> = (0..200)
        .map(|seed| chsh_empirical(&rho, &settings, 100.0, 60.0, seed).unwrap().0.s)
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let (fast, time) = within_time(start, Duration::from_secs(30));
    outcome(
        (ideal - 2.0 * SQRT_2).abs() <= 1e-9 && (mean - 2.509).abs() <= 0.02 && (0.015..=0.045).contains(&sd) && fast,
        format!("ideal S = {ideal:.12}; p = 0.887 over 200 seeds: mean S = {mean:.4}, sd = {sd:.4}, {time}"),
    )
}

// 4 ----------------------------------------------------------------------

fn fringe_law() -> Outcome {
    let start = Instant::now();
    let grid: Vec<f64> = (0..24).map(|k| 2.0 * PI * k as f64 / 24.0).collect();
    // rate × duration = 4·10⁴ puts the fringe mean level N₀ at 10⁴
    let (rate, duration) = (4e4 / 15.0, 15.0);
    let bob = Projector::from_label(BasisLabel::OamPlus2);
    let scan = |rho: &DensityMatrix, seed: u64| {
        let pts = fringe_scan(rho, &bob, &grid, rate, duration, seed).unwrap();
        let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.theta, p.counts as f64)).collect();
        fit_fringe(&xy).unwrap()
    };
    let ideal = scan(&hybrid_of(&NoiseModel::ideal()), 1);
    let mut ok = (ideal.visibility - 1.0).abs() <= 0.005;
    let mut detail = format!("ideal V = {:.4} (N₀ = {:.0})", ideal.visibility, ideal.n0);
    for v in [0.90, 0.93, 0.966] {
        let fit = scan(&werner_hybrid(v), 1);
        ok &= (fit.visibility - v).abs() <= 0.01;
        detail += &format!(", injected {v} → {:.4}", fit.visibility);
    }
    let (fast, time) = within_time(start, Duration::from_secs(10));
    outcome(ok && fast, format!("{detail}, {time}"))
}

// 5 ----------------------------------------------------------------------

fn tomography_scale() -> Outcome {
    let preset = NoiseModel::preset("paper-fit").unwrap();
    let fit = noise_fit_report(preset).unwrap();
    let rho = hybrid_of(&preset);
    let (data, _) = TomographyData::simulate(&rho, 100.0, 15.0, 0).unwrap();
    let m = metric_uncertainties(&data, 200, 0, Resampling::Poisson).unwrap();
    let sigma = m.uncertainties.fidelity;
    let pass = (0.003..=0.03).contains(&sigma)
        && (fit.achieved.fidelity - 0.957).abs() <= 0.02
        && (fit.achieved.linear_entropy - 0.012).abs() <= 0.01;
    outcome(
        pass,
        format!(
            "preset F = {:.4}, S_L = {:.4}, C = {:.4} (residuals {:+.1e}, {:+.1e}, {:+.3}); simulated run F = {:.4} ± {:.4}",
            fit.achieved.fidelity,
            fit.achieved.linear_entropy,
            fit.achieved.concurrence,
            fit.residuals.fidelity,
            fit.residuals.linear_entropy,
            fit.residuals.concurrence,
            m.fidelity,
            sigma
        ),
    )
}

// 6 ----------------------------------------------------------------------

fn budget_arithmetic() -> Outcome {
    let b = RateBudget::paper_defaults();
    let proj = RateBudget::deterministic_projection(0.4).unwrap().report();
    let pass = (b.prep_probability() - 0.40).abs() < 1e-15
        && (b.det_probability() - 0.08).abs() < 1e-15
        && (proj.gain_over_defaults - 8.0).abs() < 1e-12
        && (proj.projected_observed_cps - 800.0).abs() < 1e-9;
    outcome(
        pass,
        format!(
            "p_prep = {}, p_det = {}, model rate = {} cps; deterministic + fiber 0.4: ×{} → {} cps",
            b.prep_probability(),
            b.det_probability(),
            b.expected_rate(),
            proj.gain_over_defaults,
            proj.projected_observed_cps
        ),
    )
}

// 7 ----------------------------------------------------------------------

fn random_density(rng: &mut impl Rng, factors: Vec<Factor>) -> DensityMatrix {
    let d: usize = factors.iter().map(|f| f.dim()).product();
    let g = CMatrix::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &g * g.adjoint();
    let tr = linalg::trace(&m).re;
    DensityMatrix::new(m.unscale(tr), factors).unwrap()
}

fn property_suites() -> Outcome {
    let mut rng = rng_from_seed(stream_seed(7, StreamDomain::Test, 0));
    // informational completeness
    let mut round_trip: f64 = 0.0;
    for _ in 0..200 {
        let rho = random_density(&mut rng, TWO_QUBIT.to_vec());
        let est = linear_inversion(&TomographyData::expected(&rho, 100.0, 15.0).unwrap()).unwrap();
        round_trip = round_trip.max((est.matrix() - rho.matrix()).norm());
    }
    // MLE physicality on random count tables
    let mut min_eig: f64 = 1.0;
    for _ in 0..100 {
        let counts = (0..36).map(|_| rng.random_range(0..2000u32) as f64).collect();
        let data = TomographyData::new(tomography_settings(15.0).unwrap(), counts).unwrap();
        let start = linear_inversion(&data)
            .and_then(|op| project_to_physical(&op))
            .unwrap_or_else(|_| DensityMatrix::maximally_mixed(TWO_QUBIT.to_vec()));
        let out = mle_reconstruct(&data, &start).unwrap();
        min_eig = min_eig.min(out.rho.eigenvalues()[0]);
    }
    // complete positivity and trace on every element: act on the element's
    // input with a polarization ancilla attached
    let elements = [
        (qplate(1).unwrap(), false),
        (polarizer(BasisLabel::H).unwrap(), false),
        (polarizer(BasisLabel::L).unwrap(), false),
        (half_waveplate(0.4), false),
        (quarter_waveplate(1.3), false),
        (smf_filter(), false),
        (transferrer_pi_to_o2(TransferMode::Probabilistic), false),
        (transferrer_pi_to_o2(TransferMode::Deterministic), false),
        (transferrer_o2_to_pi(TransferMode::Probabilistic), true),
        (transferrer_o2_to_pi(TransferMode::Deterministic), true),
        (fiber_compensation(), false),
    ];
    let h = DensityMatrix::from_ket(&basis_ket(BasisLabel::H)).unwrap();
    let mut cp_violations = 0usize;
    for (map, needs_h) in &elements {
        for _ in 0..10_000 {
            let mut factors = map.input_factors().to_vec();
            factors.push(Factor::Polarization);
            let rho = if *needs_h {
                h.tensor(&random_density(&mut rng, vec![Factor::OamO2, Factor::Polarization]))
                    .unwrap()
            } else {
                random_density(&mut rng, factors.clone())
            };
            let targets: Vec<usize> = (0..factors.len() - 1).collect();
            let out = map.apply_density(&rho, &targets).unwrap();
            let tr = out.state.trace();
            let eig = out.state.eigenvalues()[0];
            let trace_ok = match map.kind() {
                MapKind::Unitary => (tr - 1.0).abs() < 1e-12,
                MapKind::Filter => tr <= 1.0 + 1e-12,
            };
            if eig < -1e-12 || !trace_ok {
                cp_violations += 1;
            }
        }
    }
    // analytic gradient against central differences
    let (data, _) = TomographyData::simulate(&werner_hybrid(0.9), 100.0, 15.0, 3).unwrap();
    let model = LikelihoodModel::new(&data);
    let mut worst_grad: f64 = 0.0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = model.gradient(&x);
        for k in 0..16 {
            let step = 1e-5 * x[k].abs().max(0.1);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += step;
            xm[k] -= step;
            let fd = (model.value(&xp) - model.value(&xm)) / (2.0 * step);
            worst_grad = worst_grad.max((fd - g[k]).abs() / g[k].abs().max(1.0));
        }
    }
    outcome(
        round_trip <= 1e-12 && min_eig >= -1e-10 && cp_violations == 0 && worst_grad <= 1e-5,
        format!(
            "round trip {round_trip:.1e}; MLE min eigenvalue {min_eig:.1e}; {} element applications, {cp_violations} CP/trace violations; gradient rel. error {worst_grad:.1e}",
            elements.len() * 10_000
        ),
    )
}

// 8 ----------------------------------------------------------------------

fn run_pipeline(dir: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_hybrident"))
        .args(["pipeline", "--seed", "11", "--resamples", "100", "--out"])
        .arg(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if !(run_pipeline(a.path()) && run_pipeline(b.path())) {
        return outcome(false, "pipeline run failed");
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let differing: Vec<String> = names
        .iter()
        .filter(|n| std::fs::read(a.path().join(n)).ok() != std::fs::read(b.path().join(n)).ok())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    outcome(
        differing.is_empty() && names.len() >= 6,
        format!("{} files compared, differing: {:?}", names.len(), differing),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("exact-pipeline identity", exact_pipeline_identity),
        ("Werner-family oracles", werner_oracles),
        ("CHSH ideal and p = 0.887 values", chsh_values),
        ("fringe law", fringe_law),
        ("tomography statistical scale", tomography_scale),
        ("budget arithmetic", budget_arithmetic),
        ("property suites", property_suites),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {} {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            o.detail
        );
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
