//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Every criterion runs once on a 1-thread
//! pool and once on a 3-thread pool; the CSV text of both runs must match.

use std::fmt::Write as _;
use std::time::Instant;

use homavg::adversary::{build_adversarial_measure, check_plan, verify_non_almost_mixing};
use homavg::engine::{
    almost_mixing_probe, convergence_scan, correlation_pair_integral, deviation_exact_inner, holder_descent_check,
    holder_descent_check_with, l1_deviation, l2_norm_spectral, PairMethod,
};
use homavg::engine::{Observable, SpectralEvaluator};
use homavg::flow::{
    spectrum_of_observable, AcPart, Atom, BoxSet, CorrelationModel, FourierSeries, SpectralModel, Spike, SpikeProfile,
    TorusWinding,
};
use homavg::measure::{Density, SelfSimilar, WeightMeasure};
use homavg::rng::{derive_seed, Stream};
use num_complex::Complex64;

const SEED: u64 = 20240601;

struct Outcome {
    pass: bool,
    summary: String,
    detail: Vec<String>,
    csv: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, summary: String::new(), detail: Vec::new(), csv: String::new() }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.detail.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

fn row(out: &mut String, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        num(out, *v);
    }
    out.push('\n');
}

fn cf(nu: &WeightMeasure, xi: f64) -> Complex64 {
    nu.char_fn(xi).unwrap().into()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

fn cantor_oracle(xi: f64) -> Complex64 {
    let mut prod = 1.0;
    let mut k = 3.0;
    while (xi / k).abs() > 1e-10 {
        prod *= (xi / k).cos();
        k *= 3.0;
    }
    Complex64::from_polar(prod, xi / 2.0)
}

fn between(s: &mut Stream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * s.uniform()
}

fn pick(s: &mut Stream, n: usize) -> usize {
    ((s.uniform() * n as f64) as usize).min(n - 1)
}

fn random_density(s: &mut Stream) -> WeightMeasure {
    let lo = between(s, -1.0, 1.0);
    let w = between(s, 0.2, 2.0);
    let d = match pick(s, 4) {
        0 => Density::uniform(lo, lo + w),
        1 => Density::Triangular { lo, mode: lo + w * s.uniform(), hi: lo + w },
        2 => Density::TruncatedGaussian { mean: lo + 0.5 * w, sd: between(s, 0.1, 1.0), lo, hi: lo + w },
        _ => {
            let raw: Vec<f64> = (0..1 + pick(s, 5)).map(|_| between(s, 0.05, 1.0)).collect();
            let total: f64 = raw.iter().sum();
            Density::Piecewise { lo, hi: lo + w, weights: raw.iter().map(|x| x / total).collect() }
        }
    };
    WeightMeasure::Density(d)
}

fn random_weight(s: &mut Stream) -> WeightMeasure {
    match pick(s, 5) {
        0 => WeightMeasure::cantor_thirds(),
        1 => WeightMeasure::SelfSimilar(if s.uniform() < 0.5 {
            SelfSimilar::dyadic_odd()
        } else {
            SelfSimilar::dyadic_even()
        }),
        2 => random_density(s).scale(between(s, 0.3, 3.0)).unwrap(),
        _ => random_density(s),
    }
}

fn random_spectrum(s: &mut Stream, atomic: bool) -> SpectralModel {
    let atoms: Vec<(f64, f64)> = (0..if atomic { 1 + pick(s, 4) } else { pick(s, 3) })
        .map(|_| (between(s, -20.0, 20.0), between(s, 0.1, 1.0)))
        .collect();
    let ac = (!atomic).then(|| {
        let lo = between(s, -10.0, 5.0);
        let weights: Vec<f64> = (0..1 + pick(s, 6)).map(|_| between(s, 0.0, 1.0)).collect();
        (lo, lo + between(s, 0.5, 10.0), weights)
    });
    let total = atoms.iter().map(|a| a.1).sum::<f64>() + ac.as_ref().map_or(0.0, |a| a.2.iter().sum());
    SpectralModel::new(
        atoms.into_iter().map(|(frequency, m)| Atom { frequency, mass: m / total }).collect(),
        ac.map(|(lo, hi, w)| AcPart { lo, hi, weights: w.iter().map(|x| x / total).collect() }),
    )
    .unwrap()
}

/// Decay of averages along the golden winding.
fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let flow = TorusWinding::golden();
    let series = FourierSeries::sqrt2_cos(2, 1);
    let nu = WeightMeasure::uniform(0.0, 1.0);
    let grid = [1e1, 1e2, 1e3, 1e4];
    let a2 = flow.alpha[1];

    let clock = Instant::now();
    let sigma = spectrum_of_observable(&flow, &series).unwrap();
    let spectral = convergence_scan(&SpectralEvaluator { sigma, nu: nu.clone() }, &grid, SEED).unwrap();
    let elapsed = clock.elapsed().as_secs_f64();
    let v = &spectral.values;
    o.check(
        v.windows(2).all(|w| w[1] < w[0]),
        format!("spectral values strictly decrease: {:?}", v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>()),
    );
    o.check(v[3] < 0.01, format!("value at t = 1e4 is {:.3e} < 0.01", v[3]));
    o.check(elapsed < 1.0, format!("spectral scan took {elapsed:.3} s < 1 s"));
    let mut worst: f64 = 0.0;
    let mut bound_ok = true;
    for (t, value) in grid.iter().zip(v) {
        let xi = 2.0 * std::f64::consts::PI * t * a2;
        worst = worst.max((value - sinc(0.5 * xi).abs()).abs());
        bound_ok &= *value <= 2.0 / xi;
    }
    o.check(worst < 1e-12, format!("matches |sin(ξ/2)/(ξ/2)| at ξ = 2πtα₂ to {worst:.1e}"));
    o.check(bound_ok, "values respect |ν̂(ξ)| ≤ 2/|ξ|".into());

    let f = Observable::Fourier(series);
    let mut sampled_ok = true;
    let mut exact_ok = true;
    o.csv.push_str("t,spectral,l1_sampled,se_sampled,inner_bias,l1_exact_inner,se_exact_inner\n");
    for (k, (&t, &s)) in grid.iter().zip(v).enumerate() {
        let seed = derive_seed(SEED, k as u64);
        let d = l1_deviation(&flow, &f, &nu, t, 2000, 2000, seed).unwrap();
        let e = deviation_exact_inner(&flow, &f, &nu, t, 100_000, seed, false).unwrap();
        sampled_ok &= d.value <= s + 3.0 * d.std_error + d.inner_bias_bound;
        exact_ok &= e.value <= s + 3.0 * e.std_error;
        row(&mut o.csv, &[t, s, d.value, d.std_error, d.inner_bias_bound, e.value, e.std_error]);
    }
    o.check(exact_ok, "exact-inner MC l1 ≤ spectral + 3·se at every t".into());
    o.check(sampled_ok, "nested MC l1 (2000×2000) ≤ spectral + 3·se + inner bias bound at every t".into());
    o.summary = format!("spectral {:.2e} → {:.2e}", v[0], v[3]);
    o
}

/// The descent inequality on random spectral models.
fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let clock = Instant::now();
    let mut stream = Stream::new(derive_seed(SEED, 2));
    let mut failures = 0;
    let mut worst_gap = f64::INFINITY;
    o.csv.push_str("instance,n,t,lhs,rhs\n");
    for k in 0..200 {
        let sigma = random_spectrum(&mut stream, k % 2 == 0);
        let nu = random_weight(&mut stream);
        let n = [2, 3, 5][k % 3];
        let t = between(&mut stream, 0.5, 30.0);
        let r = holder_descent_check(&sigma, &nu, t, n).unwrap();
        if !r.pass {
            failures += 1;
        }
        worst_gap = worst_gap.min(r.rhs - r.lhs);
        row(&mut o.csv, &[k as f64, n as f64, t, r.lhs, r.rhs]);
    }
    o.check(failures == 0, format!("200 random instances, {failures} failures, min rhs − lhs = {worst_gap:.2e}"));
    let r = holder_descent_check_with(&SpectralModel::uniform(0.0, 1.0), |r| r, f64::INFINITY, 2).unwrap();
    let (dl, dr) = ((r.lhs - 1.0 / 3.0).abs(), (r.rhs - 0.2f64.sqrt()).abs());
    o.check(dl < 1e-12 && dr < 1e-12, format!("closed form: |lhs − 1/3| = {dl:.1e}, |rhs − √(1/5)| = {dr:.1e}"));
    let elapsed = clock.elapsed().as_secs_f64();
    o.check(elapsed < 10.0, format!("took {elapsed:.2} s < 10 s"));
    o.summary = format!("{failures} of 200 fail");
    o
}

/// Convolution algebra.
fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let clock = Instant::now();
    let mut stream = Stream::new(derive_seed(SEED, 3));
    let mut worst: f64 = 0.0;
    let mut worst_mc: f64 = 0.0;
    o.csv.push_str("pair,xi,re,im\n");
    for pair in 0..20 {
        let a = random_weight(&mut stream);
        let b = random_weight(&mut stream);
        let c = a.convolve(&b).unwrap();
        let samples = c.sample(100_000, derive_seed(SEED, 300 + pair));
        for j in 0..50 {
            let xi = between(&mut stream, -60.0, 60.0);
            let z = cf(&c, xi);
            worst = worst.max((z - cf(&a, xi) * cf(&b, xi)).norm());
            if j < 3 {
                let emp: Complex64 = samples.iter().map(|r| Complex64::from_polar(1.0, xi * r)).sum::<Complex64>()
                    / samples.len() as f64;
                worst_mc = worst_mc.max((emp - z).norm());
            }
            row(&mut o.csv, &[pair as f64, xi, z.re, z.im]);
        }
    }
    o.check(worst < 1e-9, format!("20 pairs × 50 frequencies: max |ν̂∗μ − ν̂·μ̂| = {worst:.1e}"));
    o.check(worst_mc < 0.02, format!("empirical char fn of 1e5 convolution samples within {worst_mc:.1e} (< 0.02)"));

    let u = WeightMeasure::uniform(0.0, 1.0);
    let grid = u.convolve(&u).unwrap().density_grid(1e-3).unwrap();
    let tri = |x: f64| if (0.0..=2.0).contains(&x) { 1.0 - (x - 1.0).abs() } else { 0.0 };
    let cells = 400_000;
    let h = 2.2 / cells as f64;
    let l1: f64 = (0..cells).map(|k| -0.1 + (k as f64 + 0.5) * h).map(|x| (grid.pdf(x) - tri(x)).abs() * h).sum();
    o.check(l1 < 1e-3, format!("uniform∗uniform grid vs triangular density: L¹ = {l1:.2e}"));
    let elapsed = clock.elapsed().as_secs_f64();
    o.check(elapsed < 30.0, format!("took {elapsed:.2} s < 30 s"));
    o.summary = format!("max product error {worst:.1e}, L¹ {l1:.1e}");
    o
}

fn random_correlation(s: &mut Stream) -> CorrelationModel {
    match pick(s, 3) {
        0 => {
            let flow = if s.uniform() < 0.5 { TorusWinding::golden() } else { TorusWinding::pell() };
            let a = BoxSet::new(vec![between(s, 0.1, 0.9), between(s, 0.1, 0.9)]).unwrap();
            let b = BoxSet::new(vec![between(s, 0.1, 0.9), between(s, 0.1, 0.9)]).unwrap();
            CorrelationModel::ClosedForm { flow, a, b }
        }
        1 => {
            let atomic = s.uniform() < 0.5;
            CorrelationModel::Bochner { spectrum: random_spectrum(s, atomic) }
        }
        _ => {
            let growth = between(s, 1.5, 4.0);
            let mut p = SpikeProfile::geometric(
                between(s, 2.0, 5.0),
                growth,
                between(s, 0.2, 1.0),
                between(s, 0.1, 0.5),
                500.0,
            )
            .unwrap();
            p.baseline = between(s, 0.0, 0.3);
            p.diagonal = Spike { center: 0.0, half_width: between(s, 0.5, 1.5), height: between(s, 0.5, 1.0) };
            CorrelationModel::SpikeProfile(p)
        }
    }
}

/// Pair integrals by sampling and by quadrature; the spectral bridge.
fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let clock = Instant::now();
    let mut stream = Stream::new(derive_seed(SEED, 4));
    let mut misses = Vec::new();
    let mut worst_z: f64 = 0.0;
    o.csv.push_str("case,t,quadrature,q_error,sampling,s_error\n");
    for case in 0..50 {
        let rho = random_correlation(&mut stream);
        let nu = random_density(&mut stream);
        let t = between(&mut stream, 0.5, 80.0);
        let q = correlation_pair_integral(&rho, &nu, t, PairMethod::Quadrature).unwrap();
        let method = PairMethod::Sampling { count: 200_000, seed: derive_seed(SEED, 400 + case) };
        let s = correlation_pair_integral(&rho, &nu, t, method).unwrap();
        let combined = q.error.hypot(s.error);
        let z = (q.value - s.value).abs() / combined.max(1e-300);
        worst_z = worst_z.max(z);
        if (q.value - s.value).abs() > 3.0 * combined {
            misses.push(case);
        }
        row(&mut o.csv, &[case as f64, t, q.value, q.error, s.value, s.error]);
    }
    o.check(
        misses.is_empty(),
        format!("50 cases agree within 3·combined error (worst {worst_z:.2}σ), misses {misses:?}"),
    );

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let atomic = stream.uniform() < 0.5;
        let sigma = random_spectrum(&mut stream, atomic);
        let nu = random_density(&mut stream);
        let t = between(&mut stream, 0.5, 40.0);
        let rho = CorrelationModel::Bochner { spectrum: sigma.clone() };
        let pair = correlation_pair_integral(&rho, &nu, t, PairMethod::Quadrature).unwrap();
        let norm = l2_norm_spectral(&sigma, &nu, t).unwrap();
        worst = worst.max((pair.value - norm * norm).abs());
        row(&mut o.csv, &[t, pair.value, norm * norm]);
    }
    o.check(worst < 1e-6, format!("Bochner bridge on 20 instances: max |pair − ‖·‖²| = {worst:.1e}"));
    let elapsed = clock.elapsed().as_secs_f64();
    o.check(elapsed < 60.0, format!("took {elapsed:.2} s < 60 s"));
    o.summary = format!("{} misses, bridge {worst:.1e}", misses.len());
    o
}

/// The almost-mixing probe on sparse and dense spike trains.
fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    let clock = Instant::now();
    let nu = WeightMeasure::uniform(0.0, 1.0);
    let grid = [1e1, 1e2, 1e3, 1e4, 1e5];
    let reach = 1e5 + 1.0;
    let sparse = SpikeProfile::geometric(10.0, 10.0, 1.0, 0.5, reach).unwrap();
    let dense = SpikeProfile::progression(4.0, 1.0, 0.5, (reach / 4.0) as usize).unwrap();
    let a = almost_mixing_probe(&sparse, &nu, &grid, 1.0, PairMethod::Quadrature).unwrap().curve;
    let b = almost_mixing_probe(&dense, &nu, &grid, 1.0, PairMethod::Quadrature).unwrap().curve;
    let (a0, a1) = (a.values[0], a.values[4]);
    let (b0, b1) = (b.values[0], b.values[4]);
    o.check(a1 < 0.05 * a0, format!("geometric spikes: {a0:.3e} → {a1:.3e}, ratio {:.2e} < 0.05", a1 / a0));
    o.check(b1 > 0.5 * b0, format!("arithmetic spikes: {b0:.3e} → {b1:.3e}, ratio {:.3} > 0.5", b1 / b0));
    let elapsed = clock.elapsed().as_secs_f64();
    o.check(elapsed < 60.0, format!("took {elapsed:.2} s < 60 s"));
    o.csv = a.to_csv() + &b.to_csv();
    o.summary = format!("ratios {:.1e} and {:.2}", a1 / a0, b1 / b0);
    o
}

/// The nested-interval construction on the golden winding.
fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let clock = Instant::now();
    let flow = TorusWinding::golden();
    let a = BoxSet::cube(0.5, 2).unwrap();
    let plan = build_adversarial_measure(&flow, &a, 4).unwrap();
    o.check(plan.levels.len() == 4 && plan.failure.is_none(), format!("depth {} reached", plan.levels.len()));
    o.check(check_plan(&plan).is_ok(), "plan passes its own invariant check".into());

    let tree = &plan.measure;
    let mut nested = true;
    let mut counts = true;
    let mut parent_hw = vec![0.5];
    for (k, level) in tree.levels.iter().enumerate() {
        counts &= level.len() == 1 << (k + 1);
        for (j, node) in level.iter().enumerate() {
            nested &= node.offset.abs() + node.half_width <= parent_hw[j / 2];
        }
        parent_hw = level.iter().map(|n| n.half_width).collect();
    }
    o.check(nested, "every interval lies inside its parent".into());
    o.check(counts, "level n has 2ⁿ intervals of mass 2⁻ⁿ".into());

    let mut centers_ok = true;
    for rec in &plan.levels {
        for p in rec.p.iter().flat_map(|&p| [p, p + 1]) {
            let v = (p as f64 * rec.signed_distance).rem_euclid(1.0);
            let v = v.min(1.0 - v);
            let overlap = 0.5 * (0.5 - v).max(0.0);
            centers_ok &= (overlap - 0.25).abs() < 1.0 / rec.n as f64;
        }
    }
    o.check(centers_ok, "midpoint correlations within 1/n of μ(A) = 1/4".into());

    let reports = verify_non_almost_mixing(&plan, 100_000, SEED).unwrap();
    o.csv.push_str("n,estimate,std_error,exact\n");
    for r in &reports {
        let n = r.n as f64;
        let floor = 0.25 - 1.0 / n - 2f64.powi(1 - r.n as i32) - 3.0 * r.std_error;
        o.check(
            r.estimate >= floor,
            format!("level {}: estimate {:.4} ± {:.4} ≥ {floor:.4}", r.n, r.estimate, r.std_error),
        );
        if r.n >= 2 {
            o.check(r.estimate > r.mixing, format!("level {}: estimate exceeds the mixing value 1/16", r.n));
        }
        o.check(
            (r.estimate - r.exact).abs() <= 3.0 * r.std_error,
            format!("level {}: MC {:.4} vs quadrature {:.4}", r.n, r.estimate, r.exact),
        );
        row(&mut o.csv, &[n, r.estimate, r.std_error, r.exact]);
    }
    let elapsed = clock.elapsed().as_secs_f64();
    o.check(elapsed < 120.0, format!("took {elapsed:.2} s < 120 s"));
    o.summary =
        format!("estimates {}", reports.iter().map(|r| format!("{:.3}", r.estimate)).collect::<Vec<_>>().join(", "));
    o
}

/// Cantor weight against an atomic spectrum.
fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let nu = WeightMeasure::cantor_thirds();
    let w = std::f64::consts::PI;
    let sigma = SpectralModel::atom(w);
    let mut worst: f64 = 0.0;
    let mut values = Vec::new();
    o.csv.push_str("t,value\n");
    for k in 1..=12 {
        let t = 3f64.powi(k);
        let v = l2_norm_spectral(&sigma, &nu, t).unwrap();
        worst = worst.max((v - cantor_oracle(t * w).norm()).abs());
        values.push(v);
        row(&mut o.csv, &[t, v]);
    }
    let mut stream = Stream::new(derive_seed(SEED, 7));
    for _ in 0..200 {
        let xi = between(&mut stream, -1e5, 1e5);
        worst = worst.max((cf(&nu, xi) - cantor_oracle(xi)).norm());
    }
    o.check(worst < 1e-8, format!("char fn and spectral values match the infinite product to {worst:.1e}"));
    let lowest = values.iter().copied().fold(f64::INFINITY, f64::min);
    o.detail.push(format!(
        "info values along t = 3^k: {:?} (min {lowest:.4})",
        values.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>()
    ));
    o.summary = format!("min along 3^k is {lowest:.4}");
    o
}

type Criterion = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Criterion); 7] = [
        ("1 decay along the golden winding", criterion_1),
        ("2 descent inequality", criterion_2),
        ("3 convolution algebra", criterion_3),
        ("4 pair integral consistency", criterion_4),
        ("5 almost-mixing probe", criterion_5),
        ("6 nested-interval construction", criterion_6),
        ("7 singular weight", criterion_7),
    ];
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let (one, three) = (pool(1), pool(3));
    let mut all = true;
    let mut identical = true;
    for (name, run) in criteria {
        let clock = Instant::now();
        let first = one.install(run);
        let elapsed = clock.elapsed().as_secs_f64();
        let second = three.install(run);
        let same = first.csv == second.csv;
        identical &= same;
        all &= first.pass;
        println!("{} C{name}: {} ({elapsed:.2} s)", if first.pass { "PASS" } else { "FAIL" }, first.summary);
        for line in &first.detail {
            println!("       {line}");
        }
        if !same {
            println!("       FAIL output differs between 1 and 3 threads");
        }
    }
    println!(
        "{} C8 determinism: every criterion's CSV is byte-identical on 1 and 3 threads",
        if identical { "PASS" } else { "FAIL" }
    );
    if !(all && identical) {
        std::process::exit(1);
    }
}
