//! One runner per task kind. Each writes its artifacts into the output
//! directory and returns their file names.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nilwalk::batch::SampleBatch;
use nilwalk::decomposition::WeightDecomposition;
use nilwalk::diffusion::{diffusion_batch, generator_from_measure, DiffusionConfig, GeneratorSpec};
use nilwalk::linalg::Subspace;
use nilwalk::measure::{abelian_stats, IncrementMeasure, Num};
use nilwalk::presets::filiform3;
use nilwalk::rng::derive_seed;
use nilwalk::scalar::{format_q, q_vec_to_f64, Q};
use nilwalk::stats::{
    asymptotically_close, berry_esseen_curve, expectation, levy_expectation, llt_ratio, two_sample_distance,
    DensityModel, Kde, LltOptions,
};
use nilwalk::support::{
    dc_condition_check, filiform_member_exact, filiform_outside_fraction, gaussian_case_check, horizontal_endpoint,
    strichartz_integral, ControlSequence, Membership, PiecewisePath,
};
use nilwalk::walk::{walk_batch, Recentering, WalkConfig};
use nilwalk::{Error, LieAlgebra, Result};
use serde::Serialize;
use serde_json::json;

use crate::spec::{load_measure, missing, DensitySource, Reference, Task};

/// Draws used for the non-closed-form layer moments of a measure.
const MOMENT_SAMPLES: usize = 100_000;

pub struct Context {
    pub alg: LieAlgebra,
    pub base: PathBuf,
    pub measure: Option<IncrementMeasure>,
    pub bias: Option<Vec<Q>>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub config_hash: String,
    pub artifacts: Vec<String>,
}

fn nums_to_q(v: &[Num]) -> Vec<Q> {
    v.iter().map(|n| n.0.clone()).collect()
}

impl Context {
    fn seed(&self, task: &Task) -> Result<u64> {
        self.seed.ok_or_else(|| missing("a seed", task))
    }

    fn measure(&self, task: &Task) -> Result<&IncrementMeasure> {
        self.measure.as_ref().ok_or_else(|| missing("a measure", task))
    }

    /// `X̄` from the spec, else the measure mean. When both are present they
    /// must agree modulo `[g, g]`.
    fn bias(&self, task: &Task) -> Result<Vec<Q>> {
        match (&self.bias, &self.measure) {
            (Some(b), Some(m)) => {
                let mean = m.mean_exact();
                let diff: Vec<Q> = b.iter().zip(&mean).map(|(x, y)| x - y).collect();
                let full = Subspace::full(self.alg.dim());
                if b.len() != mean.len() || !self.alg.bracket_spaces(&full, &full).contains_vec(&diff) {
                    return Err(Error::InvalidParameter("bias does not match the measure mean modulo [g, g]".into()));
                }
                Ok(b.clone())
            }
            (Some(b), None) => Ok(b.clone()),
            (None, Some(m)) => Ok(m.mean_exact()),
            (None, None) => Err(missing("a bias or a measure", task)),
        }
    }

    fn decomposition(&self, task: &Task) -> Result<WeightDecomposition> {
        WeightDecomposition::for_bias(&self.alg, &self.bias(task)?)
    }

    fn walk(&self, task: &Task, steps: usize, trials: usize) -> Result<WalkConfig> {
        let dec = self.decomposition(task)?;
        Ok(WalkConfig::new(dec, self.measure(task)?.clone(), steps).trials(trials).seed(self.seed(task)?))
    }

    fn generator(&self, task: &Task, dec: &WeightDecomposition) -> Result<GeneratorSpec> {
        let seed = derive_seed(self.seed.unwrap_or(0), "moments");
        generator_from_measure(dec, &abelian_stats(self.measure(task)?, dec, MOMENT_SAMPLES, seed)?)
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    fn write_batch(&mut self, stem: &str, batch: &mut SampleBatch) -> Result<()> {
        batch.meta.config_hash = Some(self.config_hash.clone());
        let csv = self.path(&format!("{stem}.csv"));
        let meta = self.path(&format!("{stem}.meta.json"));
        batch.save(&csv, &meta)
    }

    fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn is_filiform3(alg: &LieAlgebra) -> bool {
    serde_json::to_value(alg.to_json()).ok() == serde_json::to_value(filiform3().to_json()).ok()
}

fn strings(v: &[Q]) -> Vec<String> {
    v.iter().map(format_q).collect()
}

pub fn run(ctx: &mut Context, task: &Task) -> Result<serde_json::Value> {
    match task {
        Task::Algebra => {
            let alg = &ctx.alg;
            let summary = json!({
                "dim": alg.dim(),
                "step": alg.step(),
                "basis": alg.basis_names(),
                "lower_central_dims": alg.lower_central_series().iter().map(Subspace::dim).collect::<Vec<_>>(),
            });
            let body = json!({ "summary": summary, "algebra": alg.to_json() });
            ctx.write_json("algebra.json", &body)?;
            Ok(summary)
        }
        Task::Filtration => {
            let dec = ctx.decomposition(task)?;
            let summary = json!({
                "homogeneous_dimension": dec.homogeneous_dimension(),
                "dims": dec.filtration().dims(),
                "layer_dims": (1..=dec.b_max()).map(|b| dec.layer_dim(b)).collect::<Vec<_>>(),
                "centered": dec.is_centered(),
            });
            let body = json!({ "summary": summary, "decomposition": dec.to_json() });
            ctx.write_json("filtration.json", &body)?;
            Ok(summary)
        }
        Task::SimulateWalk { steps, trials, rescale, recentering, truncation } => {
            let cfg = ctx
                .walk(task, *steps, *trials)?
                .rescale(*rescale)
                .recentering(recentering.clone())
                .truncation(truncation.clone());
            let mut batch = walk_batch(&cfg)?;
            ctx.write_batch("endpoints", &mut batch)?;
            Ok(json!({ "trials": batch.len(), "mean": batch.mean() }))
        }
        Task::SimulateDiffusion { horizon, dt, trials } => {
            let dec = ctx.decomposition(task)?;
            let gen = ctx.generator(task, &dec)?;
            ctx.write_json("generator.json", &gen.to_json())?;
            let cfg = DiffusionConfig::new(gen, *horizon).dt(*dt).trials(*trials).seed(ctx.seed(task)?);
            let mut batch = diffusion_batch(&cfg)?;
            ctx.write_batch("endpoints", &mut batch)?;
            Ok(json!({ "trials": batch.len(), "mean": batch.mean() }))
        }
        Task::CompareClt { steps, trials, dt } => {
            let seed = ctx.seed(task)?;
            let walk = ctx.walk(task, *steps, *trials)?.seed(derive_seed(seed, "walk"));
            let gen = ctx.generator(task, &walk.dec)?;
            let mut a = walk_batch(&walk)?;
            let mut b = diffusion_batch(&DiffusionConfig::new(gen, 1.0).dt(*dt).trials(*trials).seed(derive_seed(seed, "diffusion")))?;
            ctx.write_batch("walk", &mut a)?;
            ctx.write_batch("diffusion", &mut b)?;
            let report = two_sample_distance(&a, &b)?;
            ctx.write_json("report.json", &report)?;
            Ok(json!({ "pass": report.pass, "max_ks": report.max_ks, "ks_threshold": report.ks_threshold }))
        }
        Task::BerryEsseen { steps, trials, function, reference } => {
            let template = ctx.walk(task, 1, *trials)?;
            let (value, se) = match reference {
                Reference::Levy => (levy_expectation(function, 1.0)?, 0.0),
                Reference::Value { value, std_error } => (*value, *std_error),
                Reference::Diffusion { trials, dt } => {
                    let gen = ctx.generator(task, &template.dec)?;
                    let seed = derive_seed(template.seed, "reference");
                    let b = diffusion_batch(&DiffusionConfig::new(gen, 1.0).dt(*dt).trials(*trials).seed(seed))?;
                    expectation(&b, function)?
                }
            };
            let curve = berry_esseen_curve(&template, function, steps, value, se)?;
            let rows: Vec<Vec<f64>> = curve
                .points
                .iter()
                .map(|p| vec![p.n as f64, p.estimate, p.std_error, p.error, p.error_ci.0, p.error_ci.1])
                .collect();
            ctx.write_csv("be_curve.csv", &["n", "estimate", "std_error", "error", "error_ci_low", "error_ci_high"], &rows)?;
            ctx.write_json("be_curve.json", &curve)?;
            Ok(json!({ "mean_ratio": curve.mean_ratio, "slope": curve.slope }))
        }
        Task::Llt { steps, samples, function, density, kde_trials, dt, left_deviation, right_deviation } => {
            let mut cfg = ctx.walk(task, *steps, *samples)?;
            if let Some(h) = right_deviation {
                cfg = cfg.recentering(Recentering::DriftThen(h.clone()));
            }
            let model = match density {
                DensitySource::Levy => DensityModel::Levy,
                DensitySource::Kde => {
                    let gen = ctx.generator(task, &cfg.dec)?;
                    let seed = derive_seed(cfg.seed, "kde");
                    let b = diffusion_batch(&DiffusionConfig::new(gen, 1.0).dt(*dt).trials(*kde_trials).seed(seed))?;
                    DensityModel::Kde(Kde::silverman(&b)?)
                }
            };
            let report = llt_ratio(&cfg, function, &model, &LltOptions { left_deviation: left_deviation.clone() })?;
            ctx.write_json("llt.json", &report)?;
            Ok(json!({ "ratio": report.ratio, "ratio_ci": report.ratio_ci, "hits": report.hits }))
        }
        Task::Support { controls, paths, steps, trials } => {
            let dec = ctx.decomposition(task)?;
            let gen = match &ctx.measure {
                Some(_) => ctx.generator(task, &dec)?,
                None => {
                    let frame = dec.layer(1).iter().map(|v| q_vec_to_f64(v)).collect();
                    GeneratorSpec::new(&dec, frame, vec![0.0; dec.dim()])?
                }
            };
            let filiform = is_filiform3(&ctx.alg);
            let mut endpoints = Vec::new();
            for c in controls {
                let seq = ControlSequence::new(c.iter().map(|(u, t)| (nums_to_q(u), t.0.clone())).collect())?;
                let end = horizontal_endpoint(&gen, &seq)?;
                let membership: Option<Membership> = filiform.then(|| filiform_member_exact(&end));
                endpoints.push(json!({ "endpoint": strings(&end), "membership": membership }));
            }
            let mut integrals = Vec::new();
            for p in paths {
                let path = PiecewisePath::new(nums_to_q(&p.breakpoints), p.values.iter().map(|v| nums_to_q(v)).collect())?;
                integrals.push(strings(&strichartz_integral(dec.graded(), &path)?));
            }
            let outside = match steps {
                Some(n) if filiform => {
                    let batch = walk_batch(&ctx.walk(task, *n, *trials)?)?;
                    let rows: Vec<Vec<f64>> = batch.iter_rows().map(<[f64]>::to_vec).collect();
                    Some(filiform_outside_fraction(&rows, *n)?)
                }
                Some(_) => {
                    return Err(Error::InvalidParameter("the simulated support test is defined for filiform3 only".into()))
                }
                None => None,
            };
            let body = json!({ "endpoints": endpoints, "integrals": integrals, "outside": outside });
            ctx.write_json("support.json", &body)?;
            Ok(json!({
                "endpoints": endpoints.len(),
                "integrals": integrals.len(),
                "outside_fraction": outside.as_ref().map(|o| o.fraction),
            }))
        }
        Task::GaussianCheck => {
            let report = gaussian_case_check(&ctx.alg, &ctx.bias(task)?)?;
            ctx.write_json("gaussian_check.json", &report)?;
            Ok(serde_json::to_value(&report)?)
        }
        Task::AsympClose { other } => {
            let other = load_measure(other, &ctx.base)?;
            let report = asymptotically_close(&ctx.alg, ctx.measure(task)?, &other)?;
            ctx.write_json("asymp_close.json", &report)?;
            Ok(serde_json::to_value(&report)?)
        }
        Task::DcCheck { generators, trials } => {
            let gens: Vec<Vec<Q>> = generators.iter().map(|g| nums_to_q(g)).collect();
            let report = dc_condition_check(&ctx.alg, &gens, *trials, ctx.seed(task)?)?;
            ctx.write_json("dc_check.json", &report)?;
            Ok(serde_json::to_value(&report)?)
        }
    }
}

pub fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p)?;
    Ok(())
}
