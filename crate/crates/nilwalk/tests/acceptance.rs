//! Desk-scale acceptance run. Prints one line per criterion and exits nonzero
//! if any fails. Pass criterion numbers as arguments to run a subset.

use std::time::{Duration, Instant};

use nilwalk::decomposition::WeightDecomposition;
use nilwalk::diffusion::{diffusion_batch, generator_from_measure, scaling_check, semigroup_check, DiffusionConfig, GeneratorSpec};
use nilwalk::filtration::weight_filtration;
use nilwalk::levy::levy_area_cdf;
use nilwalk::linalg::Subspace;
use nilwalk::measure::{abelian_stats, IncrementMeasure};
use nilwalk::presets::{filiform3, free_nilpotent, heisenberg, unitriangular};
use nilwalk::rng::{stream_rng, Rng};
use nilwalk::scalar::{q, qi, Q};
use nilwalk::stats::{
    anderson_darling_normal, asymptotically_close, berry_esseen_curve, directions, ks_one_sample, levy_expectation,
    llt_ratio, two_sample_distance, DensityModel, Factor, LltOptions, TestFunction,
};
use nilwalk::support::{
    filiform_member_exact, filiform_outside_fraction, fine_mesh_product, horizontal_endpoint, strichartz_integral,
    ControlSequence, Membership, PiecewisePath,
};
use nilwalk::walk::{walk_batch, WalkConfig};
use nilwalk::{LieAlgebra, Result};
use rand::Rng as _;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn e(n: usize, i: usize) -> Vec<Q> {
    (0..n).map(|k| qi((k == i) as i64)).collect()
}

fn uniform(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn gaussian_on_first_layer(mean: Vec<f64>) -> IncrementMeasure {
    IncrementMeasure::standard_gaussian(mean, &[0, 1]).unwrap()
}

fn decomposition(alg: &LieAlgebra, m: &IncrementMeasure) -> WeightDecomposition {
    WeightDecomposition::for_bias(alg, &m.mean_exact()).unwrap()
}

fn generator(alg: &LieAlgebra, m: &IncrementMeasure) -> GeneratorSpec {
    let dec = decomposition(alg, m);
    generator_from_measure(&dec, &abelian_stats(m, &dec, 1000, 0).unwrap()).unwrap()
}

fn algebraic_core() -> Result<Verdict> {
    let cases = [
        (heisenberg(), 1),
        (filiform3(), 1),
        (unitriangular(4)?, 0),
        (unitriangular(5)?, 0),
        (free_nilpotent(2, 4)?, 0),
    ];
    let mut rng = stream_rng(1, 0);
    let mut ok = true;
    let mut worst_assoc: f64 = 0.0;
    let mut worst_dil: f64 = 0.0;
    for (alg, bias) in &cases {
        let n = alg.dim();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (e(n, i), e(n, j));
                let ab = alg.bracket(&a, &b)?;
                let ba = alg.bracket(&b, &a)?;
                ok &= ab.iter().zip(&ba).all(|(x, y)| *x == -y.clone());
                for k in 0..n {
                    let c = e(n, k);
                    let t1 = alg.bracket(&a, &alg.bracket(&b, &c)?)?;
                    let t2 = alg.bracket(&b, &alg.bracket(&c, &a)?)?;
                    let t3 = alg.bracket(&c, &alg.bracket(&a, &b)?)?;
                    ok &= (0..n).all(|m| &t1[m] + &t2[m] + &t3[m] == qi(0));
                }
            }
        }
        for _ in 0..1000 {
            let (x, y, z) = (uniform(&mut rng, n), uniform(&mut rng, n), uniform(&mut rng, n));
            let l = alg.mul(&alg.mul(&x, &y)?, &z)?;
            let r = alg.mul(&x, &alg.mul(&y, &z)?)?;
            let d: Vec<f64> = l.iter().zip(&r).map(|(a, b)| a - b).collect();
            worst_assoc = worst_assoc.max(max_abs(&d) / max_abs(&l).max(1.0));
        }
        let dec = WeightDecomposition::for_bias(alg, &e(n, *bias))?;
        let g = dec.graded();
        for _ in 0..1000 {
            let (x, y) = (uniform(&mut rng, n), uniform(&mut rng, n));
            let r = rng.random_range(0.5..2.0);
            let l = dec.dilate(r, &g.mul(&x, &y)?)?;
            let rr = g.mul(&dec.dilate(r, &x)?, &dec.dilate(r, &y)?)?;
            let d: Vec<f64> = l.iter().zip(&rr).map(|(a, b)| a - b).collect();
            worst_dil = worst_dil.max(max_abs(&d) / max_abs(&l).max(1.0));
        }
    }
    let pass = ok && worst_assoc <= 1e-9 && worst_dil <= 1e-9;
    verdict(
        pass,
        format!(
            "Jacobi/antisymmetry exact: {ok}; associativity rel. err {worst_assoc:.1e}; dilation rel. err {worst_dil:.1e} (<= 1e-9)"
        ),
    )
}

fn filtration_correctness() -> Result<Verdict> {
    let h = WeightDecomposition::for_bias(&heisenberg(), &e(3, 1))?;
    let d = h.homogeneous_dimension();
    let mut rng = stream_rng(2, 0);
    let mut lifts_ok = true;
    let mut structure_ok = true;
    for (alg, bias) in [(heisenberg(), e(3, 1)), (filiform3(), e(4, 1)), (unitriangular(4)?, e(6, 0)), (free_nilpotent(2, 4)?, e(8, 1))] {
        let n = alg.dim();
        let base = weight_filtration(&alg, &bias)?;
        structure_ok &= base.is_nested() && base.is_bracket_compatible(&alg);
        let full = Subspace::full(n);
        let derived = alg.bracket_spaces(&full, &full);
        for _ in 0..20 {
            let mut lift = bias.clone();
            for v in derived.basis() {
                let c = qi(rng.random_range(-5..=5));
                for (l, x) in lift.iter_mut().zip(v) {
                    *l += &c * x;
                }
            }
            let f = weight_filtration(&alg, &lift)?;
            lifts_ok &= f.same_levels(&base) && f.is_nested() && f.is_bracket_compatible(&alg);
        }
    }
    verdict(
        d == 5 && lifts_ok && structure_ok,
        format!("Heisenberg X=e2 homogeneous dimension {d}; 20 lifts agree: {lifts_ok}; nested and bracket-compatible: {structure_ok}"),
    )
}

fn heisenberg_clt() -> Result<Verdict> {
    let m = gaussian_on_first_layer(vec![0.0; 3]);
    let cfg = WalkConfig::new(decomposition(&heisenberg(), &m), m, 1024).trials(100_000).seed(3);
    let batch = walk_batch(&cfg)?;
    let z = batch.column(2);
    let ks = ks_one_sample(&z, |x| levy_area_cdf(x).expect("finite"));
    verdict(ks <= 0.02, format!("KS(e3, Levy area) = {ks:.4} at N = 1024, 1e5 trials (<= 0.02)"))
}

fn diffusion_consistency() -> Result<Verdict> {
    let cases = [
        ("Heisenberg biased", heisenberg(), vec![0.0, 1.0, 0.0]),
        ("Heisenberg centered", heisenberg(), vec![0.0; 3]),
        ("filiform3 biased", filiform3(), vec![0.0, 1.0, 0.0, 0.0]),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, alg, mean)) in cases.into_iter().enumerate() {
        let gen = generator(&alg, &gaussian_on_first_layer(mean));
        let s = scaling_check(&gen, 1.0, 2.0, 100_000, 1e-3, 40 + i as u64)?;
        let g = semigroup_check(&gen, 0.5, 0.5, 100_000, 1e-3, 50 + i as u64)?;
        pass &= s.max_ks <= 0.02 && g.max_ks <= 0.02;
        parts.push(format!("{name}: scaling {:.4}, semigroup {:.4}", s.max_ks, g.max_ks));
    }
    verdict(pass, format!("max projection KS (<= 0.02): {}", parts.join("; ")))
}

fn scaling_exponents() -> Result<Verdict> {
    let m = gaussian_on_first_layer(vec![0.0, 1.0, 0.0]);
    let dec = decomposition(&heisenberg(), &m);
    let ns = [256usize, 1024, 4096];
    let mut logs = Vec::new();
    for &n in &ns {
        let b = walk_batch(&WalkConfig::new(dec.clone(), m.clone(), n).trials(20_000).seed(5).rescale(false))?;
        let z = b.column(2);
        let mu = z.iter().sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
        logs.push(var.ln());
    }
    let xs: Vec<f64> = ns.iter().map(|n| (*n as f64).ln()).collect();
    let slope = nilwalk::stats::ls_slope(&xs, &logs);
    verdict((slope - 3.0).abs() <= 0.15, format!("slope of log Var(e3) vs log N = {slope:.3} (3.0 +- 0.15)"))
}

fn filiform_support() -> Result<Verdict> {
    let m = gaussian_on_first_layer(vec![0.0, 1.0, 0.0, 0.0]);
    let dec = decomposition(&filiform3(), &m);
    let mut reports = Vec::new();
    for n in [256usize, 4096] {
        let b = walk_batch(&WalkConfig::new(dec.clone(), m.clone(), n).trials(100_000).seed(6))?;
        let rows: Vec<Vec<f64>> = b.iter_rows().map(<[f64]>::to_vec).collect();
        reports.push(filiform_outside_fraction(&rows, n)?);
    }
    let gen = GeneratorSpec::new(&dec, vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]], vec![0.0; 4])?;
    let mut rng = stream_rng(6, 1);
    let mut exact_ok = true;
    for _ in 0..500 {
        let k = rng.random_range(1..=6usize);
        let raw: Vec<i64> = (0..k).map(|_| rng.random_range(0..=5)).collect();
        let total: i64 = raw.iter().sum::<i64>().max(1);
        let mut controls: Vec<(Vec<Q>, Q)> = raw
            .iter()
            .map(|t| (vec![qi(rng.random_range(-4..=4)), qi(rng.random_range(-4..=4)), qi(0), qi(0)], q(*t, total)))
            .collect();
        if raw.iter().all(|t| *t == 0) {
            controls[0].1 = qi(1);
        }
        let end = horizontal_endpoint(&gen, &ControlSequence::new(controls)?)?;
        exact_ok &= filiform_member_exact(&end) != Membership::Outside;
    }
    let (a, b) = (&reports[0], &reports[1]);
    // beyond the band the counts may both be zero; the unbanded fraction must drop strictly
    let pass = b.fraction <= 0.02 && b.outside <= a.outside && b.raw_fraction < a.raw_fraction && exact_ok;
    verdict(
        pass,
        format!(
            "beyond band N=256: {}/{} ({:.2e}), N=4096: {}/{} ({:.2e}) (<= 0.02); unbanded {:.2e} -> {:.2e}; \
             500 exact horizontal endpoints never outside: {exact_ok}",
            a.outside, a.samples, a.fraction, b.outside, b.samples, b.fraction, a.raw_fraction, b.raw_fraction
        ),
    )
}

fn gaussian_characterization() -> Result<Verdict> {
    let mut rng = stream_rng(7, 0);
    let mut agree = 0;
    let mut gaussian = 0;
    let mut total = 0;
    for alg in [filiform3(), unitriangular(4)?] {
        for _ in 0..50 {
            let bias: Vec<Q> = (0..alg.dim()).map(|_| qi(rng.random_range(-2..=2))).collect();
            let r = nilwalk::support::gaussian_case_check(&alg, &bias)?;
            agree += r.agree as usize;
            gaussian += r.gaussian as usize;
            total += 1;
        }
    }
    let a = nilwalk::support::gaussian_case_check(&filiform3(), &e(4, 0))?;
    let t = nilwalk::support::gaussian_case_check(&filiform3(), &e(4, 1))?;
    let w1 = |mean: Vec<f64>, seed: u64| -> Result<nilwalk::batch::SampleBatch> {
        let gen = generator(&filiform3(), &gaussian_on_first_layer(mean));
        diffusion_batch(&DiffusionConfig::new(gen, 1.0).dt(1e-2).trials(100_000).seed(seed))
    };
    // per-projection tests on the coordinates and 4 random directions, Bonferroni over 8
    let dirs: Vec<Vec<f64>> = (0..4).map(|i| e(4, i).iter().map(nilwalk::scalar::q_to_f64).collect()).chain(directions(4, 4, 7)).collect();
    let wa = w1(vec![1.0, 0.0, 0.0, 0.0], 71)?;
    let min_p = dirs.iter().map(|d| anderson_darling_normal(&wa.project(d)).map(|r| r.p_value)).collect::<Result<Vec<_>>>()?;
    let min_p = min_p.into_iter().fold(1.0, f64::min);
    let wt = w1(vec![0.0, 1.0, 0.0, 0.0], 72)?;
    let e4 = anderson_darling_normal(&wt.column(3))?;
    let a_normal = min_p >= 0.05 / dirs.len() as f64;
    let pass = agree == total && a.gaussian && !t.gaussian && a_normal && !e4.normal;
    verdict(
        pass,
        format!(
            "conditions agree on {agree}/{total} random biases ({gaussian} Gaussian); X=A Gaussian: {}, min AD p-value {min_p:.3} over {} projections; X=T Gaussian: {}, e4 AD statistic {:.1} (crit 0.752)",
            a.gaussian,
            dirs.len(),
            t.gaussian,
            e4.statistic
        ),
    )
}

fn berry_esseen() -> Result<Verdict> {
    let x1 = IncrementMeasure::atomic_exact(vec![(vec![q(-1, 3), qi(0), qi(0)], q(9, 10)), (vec![qi(3), qi(0), qi(0)], q(1, 10))])?;
    let x2 = IncrementMeasure::atomic_exact(vec![(vec![qi(0), qi(1), qi(0)], q(1, 2)), (vec![qi(0), qi(-1), qi(0)], q(1, 2))])?;
    let m = IncrementMeasure::product(vec![x1, x2])?;
    let f = TestFunction::new(
        1.0,
        vec![
            Factor::Window { center: 0.7, scale: 0.7, coeffs: vec![1.0] },
            Factor::One,
            Factor::Window { center: 0.3, scale: 0.5, coeffs: vec![1.0] },
        ],
    )?;
    let reference = levy_expectation(&f, 1.0)?;
    let cfg = WalkConfig::new(decomposition(&heisenberg(), &m), m, 1).trials(500_000).seed(8);
    let c = berry_esseen_curve(&cfg, &f, &[64, 256, 1024, 4096], reference, 0.0)?;
    let pts: Vec<String> = c
        .points
        .iter()
        .map(|p| format!("N={} err {:.5} CI [{:.5}, {:.5}]", p.n, p.error, p.error_ci.0, p.error_ci.1))
        .collect();
    verdict(
        c.mean_ratio <= 0.75,
        format!("mean error(4N)/error(N) = {:.3} (<= 0.75), slope {:.2}; {}", c.mean_ratio, c.slope, pts.join(", ")),
    )
}

fn local_limit() -> Result<Verdict> {
    let m = gaussian_on_first_layer(vec![0.0; 3]);
    let cfg = WalkConfig::new(decomposition(&heisenberg(), &m), m, 64).trials(10_000_000).seed(9);
    // ∫ bump = e · 0.4439938 per unit radius on each axis
    let height = 0.1 / (std::f64::consts::E * 0.443_993_8_f64).powi(3);
    let f = TestFunction::bump(&[0.0; 3], &[1.0; 3], height)?;
    let volume = f.integral()?;
    let r = llt_ratio(&cfg, &f, &DensityModel::Levy, &LltOptions::default())?;
    verdict(
        (r.ratio - 1.0).abs() <= 0.15,
        format!(
            "N^(d/2) estimate {:.5} vs prediction {:.5}: ratio {:.3} CI [{:.3}, {:.3}] (within 15%), bump volume {volume:.4}, {} hits",
            r.scaled_estimate, r.prediction, r.ratio, r.ratio_ci.0, r.ratio_ci.1, r.hits
        ),
    )
}

fn strichartz_oracle() -> Result<Verdict> {
    let algs = [heisenberg(), filiform3(), unitriangular(4)?, free_nilpotent(2, 3)?, free_nilpotent(3, 2)?];
    let mut rng = stream_rng(10, 0);
    let meshes = [50usize, 100, 200, 400, 800];
    let mut errs = vec![0.0; meshes.len()];
    for i in 0..100 {
        let alg = &algs[i % algs.len()];
        let n = alg.dim();
        let cut = rng.random_range(0.1..0.9);
        let p = PiecewisePath::new(vec![0.0, cut, 1.0], vec![uniform(&mut rng, n), uniform(&mut rng, n)])?;
        let exact = strichartz_integral(alg, &p)?;
        for (k, m) in meshes.iter().enumerate() {
            let approx = fine_mesh_product(alg, &p, *m)?;
            let d: Vec<f64> = approx.iter().zip(&exact).map(|(a, b)| a - b).collect();
            errs[k] += max_abs(&d) / 100.0;
        }
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|r| (1.6..=2.5).contains(r));
    verdict(
        pass,
        format!(
            "mean error ratios for mesh {meshes:?}: {} (each in [1.6, 2.5]); mean error at 800 cells {:.2e}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", "),
            errs[meshes.len() - 1]
        ),
    )
}

fn asymptotic_closeness() -> Result<Verdict> {
    let alg = filiform3();
    let mu = gaussian_on_first_layer(vec![0.0; 4]);
    let shifted = mu.shifted(vec![0.0, 0.0, 0.0, 1.0])?;
    let small_shift = mu.shifted(vec![0.0, 0.0, 0.0, 1.0 / 32.0])?;
    let off = mu.shifted(vec![0.0, 0.0, 1.0, 0.0])?;
    let doubled = IncrementMeasure::gaussian(
        vec![0.0; 4],
        vec![vec![2.0, 0.0, 0.0, 0.0], vec![0.0, 2.0, 0.0, 0.0], vec![0.0; 4], vec![0.0; 4]],
    )?;
    let c_shift = asymptotically_close(&alg, &mu, &shifted)?.close;
    let c_small = asymptotically_close(&alg, &mu, &small_shift)?.close;
    let c_off = asymptotically_close(&alg, &mu, &off)?.close;
    let c_cov = asymptotically_close(&alg, &mu, &doubled)?.close;
    let dec = decomposition(&alg, &mu);
    let batch = |m: &IncrementMeasure, seed: u64| walk_batch(&WalkConfig::new(dec.clone(), m.clone(), 1024).trials(10_000).seed(seed));
    let base = batch(&mu, 111)?;
    let near = two_sample_distance(&base, &batch(&small_shift, 112)?)?;
    let far = two_sample_distance(&base, &batch(&doubled, 113)?)?;
    let pass = c_shift && c_small && !c_off && !c_cov && near.ks_pass && !far.ks_pass;
    verdict(
        pass,
        format!(
            "close(mu, mu+e4) {c_shift}, close(mu, mu+e4/32) {c_small}, close(mu, mu+e3) {c_off}, close(mu, 2cov) {c_cov}; \
             N=1024 KS mu vs mu+e4/32: {:.4} (thr {:.4}, pass {}), mu vs 2cov: {:.4} (pass {})",
            near.max_ks, near.ks_threshold, near.ks_pass, far.max_ks, far.ks_pass
        ),
    )
}

type Criterion = (usize, &'static str, fn() -> Result<Verdict>, Duration);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "algebraic core", algebraic_core, Duration::from_secs(30)),
        (2, "filtration correctness", filtration_correctness, Duration::from_secs(5)),
        (3, "centered Heisenberg CLT vs Levy area", heisenberg_clt, Duration::from_secs(300)),
        (4, "diffusion self-consistency", diffusion_consistency, Duration::from_secs(600)),
        (5, "non-centered scaling exponents", scaling_exponents, Duration::from_secs(300)),
        (6, "filiform support", filiform_support, Duration::from_secs(600)),
        (7, "Gaussian-case characterization", gaussian_characterization, Duration::from_secs(600)),
        (8, "Berry-Esseen decay", berry_esseen, Duration::from_secs(900)),
        (9, "local limit at desk scale", local_limit, Duration::from_secs(1200)),
        (10, "multiplicative integral vs fine mesh", strichartz_oracle, Duration::from_secs(60)),
        (11, "asymptotically-close criterion", asymptotic_closeness, Duration::from_secs(600)),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, run, limit) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(v) => (v.pass && elapsed <= limit, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += (!pass) as usize;
        println!(
            "criterion {id:>2} {} {name}: {detail} [{:.1} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
