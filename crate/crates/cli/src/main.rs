use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use flatmc::adversarial::{
    build_f3, build_f4, f3_mass_ratio, f3_probe_region, f4_cap_mass, f4_probe_region, intractability_threshold,
    ln_packing_lower_bound, mode_hit_experiment, probe_smoothness, cap_edges, Family, HitSampler, ModeHitConfig,
    ProbeMode,
};
use flatmc::bounds::sample_size_plan;
use flatmc::harness::{
    compare_direct_vs_tailmatch, estimate_draws, prepare, replication_seed, run_pipeline, sample_flattened,
    write_compare_csv, write_pipeline_csv, PipelineConfig, SamplerKind, Target,
};

#[derive(Parser)]
#[command(name = "flatmc", version, about = "Tail-matching importance sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived growth profile and the tractability margin.
    Profile {
        #[arg(long)]
        config: PathBuf,
    },
    /// Emit the weight second-moment bound and a sample-size plan.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eps_bar: f64,
        #[arg(long, default_value_t = 0.1)]
        eps_prime: f64,
    },
    /// Draw from the flattened density and write one row per retained state.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Reweight a stored trace and estimate the configured test functions.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Number of equal-length chains the trace is made of.
        #[arg(long, default_value_t = 1)]
        chains: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Checks on the counterexample densities.
    Adversarial {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        d: usize,
        /// Curvature ratio of the two scales.
        #[arg(long, default_value_t = 20.0)]
        kappa: f64,
        /// Curvature of the wide part.
        #[arg(long, default_value_t = 1.0)]
        base: f64,
        #[arg(long, value_enum)]
        check: CheckArg,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        theta_norm: f64,
        #[arg(long, value_enum, default_value_t = HitArg::Ula)]
        sampler: HitArg,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full run: one CSV row per replication and test function.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Langevin chains on the target against the flattened pipeline.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    F3,
    F4,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Mass,
    Smoothness,
    Threshold,
    Modehit,
}

#[derive(Clone, Copy, ValueEnum)]
enum HitArg {
    Stationary,
    Oracle,
    Ula,
    Mala,
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn load(config: &Path) -> Result<(PipelineConfig, Target)> {
    let cfg = PipelineConfig::from_path(config)?;
    let target = Target::from_config(&cfg.target)?;
    Ok((cfg, target))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Profile { config } => {
            let (cfg, target) = load(&config)?;
            let s = prepare(&cfg, &target)?;
            let p = &s.profile;
            eprintln!("profile     {}", p.provenance);
            eprintln!("c_U         {}", p.c_u);
            eprintln!("radius      {}", p.radius);
            eprintln!("L           {}", p.l);
            eprintln!("m           {}", p.m);
            eprintln!("|grad U(0)| {}", p.grad0);
            eprintln!("condition   {} <= {} : {}", s.condition_lhs, s.condition_rhs, s.condition_met);
            let mut w = sink(None)?;
            writeln!(w, "d,c_u,radius,L,m,grad0,condition_lhs,condition_rhs,margin,condition_met")?;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                s.d,
                real(p.c_u),
                real(p.radius),
                real(p.l),
                real(p.m),
                real(p.grad0),
                real(s.condition_lhs),
                real(s.condition_rhs),
                real(s.condition_rhs - s.condition_lhs),
                s.condition_met
            )?;
        }
        Command::Bounds {
            config,
            eps_bar,
            eps_prime,
        } => {
            let (cfg, target) = load(&config)?;
            let s = prepare(&cfg, &target)?;
            let (n_plan, tv) = match sample_size_plan(s.rho_bound, eps_bar, eps_prime) {
                Ok(p) => (p.n.to_string(), real(p.tv_budget)),
                Err(_) => (String::new(), real(f64::NAN)),
            };
            let mut w = sink(None)?;
            writeln!(w, "d,c,c_hat,M,condition_lhs,condition_rhs,rho_bound,regime,N_plan,tv_budget")?;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                s.d,
                real(1.0),
                real(1.0),
                real(s.m),
                real(s.condition_lhs),
                real(s.condition_rhs),
                real(s.rho_bound),
                s.regime,
                n_plan,
                tv
            )?;
        }
        Command::Sample {
            config,
            out,
            steps,
            burn_in,
            thin,
            step,
            seed,
            chains,
        } => {
            let (mut cfg, target) = load(&config)?;
            let s = &mut cfg.sampler;
            s.steps = steps.unwrap_or(s.steps);
            s.burn_in = burn_in.unwrap_or(s.burn_in);
            s.thin = thin.unwrap_or(s.thin);
            s.step = step.or(s.step);
            s.chains = chains.unwrap_or(s.chains);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let setup = prepare(&cfg, &target)?;
            let draws = sample_flattened(&cfg, &target, &setup, replication_seed(cfg.seed, 0))?;
            let mut w = sink(Some(&out))?;
            let header: Vec<String> = (1..=setup.d).map(|j| format!("x{j}")).collect();
            writeln!(w, "{}", header.join(","))?;
            for x in &draws.samples {
                let row: Vec<String> = x.iter().map(|&v| real(v)).collect();
                writeln!(w, "{}", row.join(","))?;
            }
            if cfg.sampler.kind != SamplerKind::Rejection {
                eprintln!("acceptance {:.4}, evaluations {}", draws.acceptance, draws.evaluations);
            }
        }
        Command::Estimate {
            config,
            trace,
            chains,
            out,
        } => {
            let (cfg, target) = load(&config)?;
            let setup = prepare(&cfg, &target)?;
            let samples = read_trace(&trace, setup.d)?;
            if chains == 0 || samples.len() % chains != 0 {
                bail!("{} rows cannot be split into {chains} equal chains", samples.len());
            }
            let lens = vec![samples.len() / chains; chains];
            let rows = estimate_draws(&cfg, &target, &setup, &samples, &lens)?;
            let mut w = sink(out.as_deref())?;
            writeln!(w, "function,estimate,se,ess,rho_hat,n")?;
            for r in rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.function,
                    real(r.estimate),
                    real(r.se),
                    real(r.ess),
                    real(r.rho_hat),
                    r.n
                )?;
            }
        }
        Command::Adversarial {
            family,
            d,
            kappa,
            base,
            check,
            n,
            seed,
            theta_norm,
            sampler,
            step,
            steps,
            trials,
            out,
        } => {
            let mut w = sink(out.as_deref())?;
            let name = match family {
                FamilyArg::F3 => "f3",
                FamilyArg::F4 => "f4",
            };
            let mut dir = vec![0.0; d.max(1)];
            dir[0] = 1.0;
            match check {
                CheckArg::Mass => {
                    let (ratio, se, claim) = match family {
                        FamilyArg::F3 => {
                            let (r, s) = f3_mass_ratio(&build_f3(base, kappa * base, &dir, d)?, n, seed)?;
                            (r, s, 0.25)
                        }
                        FamilyArg::F4 => {
                            let (r, s) = f4_cap_mass(&build_f4(base, kappa * base, &dir, d)?, n, seed)?;
                            (r, s, 0.5)
                        }
                    };
                    writeln!(w, "family,d,kappa,ratio,se,claimed_lower,holds")?;
                    writeln!(
                        w,
                        "{name},{d},{},{},{},{},{}",
                        real(kappa),
                        real(ratio),
                        real(se),
                        real(claim),
                        ratio - 3.0 * se >= claim
                    )?;
                }
                CheckArg::Smoothness => {
                    let (probe, bound) = match family {
                        FamilyArg::F3 => {
                            let f = build_f3(base, kappa * base, &dir, d)?;
                            let v = probe_smoothness(&f, f3_probe_region(&f), n, ProbeMode::HessianNorm, seed);
                            (v, 396.0 * f.l0)
                        }
                        FamilyArg::F4 => {
                            let f = build_f4(base, kappa * base, &dir, d)?;
                            let v = probe_smoothness(&f, f4_probe_region(&f), n, ProbeMode::GradLipschitz, seed);
                            (v, 686.0 * f.l1)
                        }
                    };
                    writeln!(w, "family,d,kappa,probe,bound,holds")?;
                    writeln!(w, "{name},{d},{},{},{},{}", real(kappa), real(probe), real(bound), probe <= bound)?;
                }
                CheckArg::Threshold => {
                    let (fam, angle) = match family {
                        FamilyArg::F3 => (Family::Sewn, 3.0 * std::f64::consts::PI / 8.0),
                        FamilyArg::F4 => (Family::Angular, 2.0 * cap_edges().0.acos()),
                    };
                    let t = intractability_threshold(d, theta_norm, fam)?;
                    let lp = ln_packing_lower_bound(d, angle).map(real).unwrap_or_default();
                    writeln!(w, "family,d,theta_norm,threshold,ln_packing_bound")?;
                    writeln!(w, "{name},{d},{},{},{}", real(theta_norm), real(t), lp)?;
                }
                CheckArg::Modehit => {
                    if matches!(family, FamilyArg::F4) {
                        bail!("the mode-hit experiment is defined for f3");
                    }
                    let s = match sampler {
                        HitArg::Stationary => HitSampler::Stationary,
                        HitArg::Oracle => HitSampler::Oracle,
                        HitArg::Ula => HitSampler::Ula { step, steps },
                        HitArg::Mala => HitSampler::Mala { step, steps },
                    };
                    let cfg = ModeHitConfig {
                        sampler: s,
                        m0: base,
                        kappa,
                    };
                    let (rate, se) = mode_hit_experiment(&cfg, d, trials, seed)?;
                    writeln!(w, "family,d,kappa,sampler,trials,hit_rate,se")?;
                    writeln!(
                        w,
                        "{name},{d},{},{},{trials},{},{}",
                        real(kappa),
                        sampler_name(sampler),
                        real(rate),
                        real(se)
                    )?;
                }
            }
        }
        Command::Pipeline { config, out } => {
            let cfg = PipelineConfig::from_path(&config)?;
            let report = run_pipeline(&cfg)?;
            let path = out.or_else(|| cfg.output.clone());
            write_pipeline_csv(&report.rows, sink(path.as_deref())?)?;
        }
        Command::Compare { config, out } => {
            let cfg = PipelineConfig::from_path(&config)?;
            let report = compare_direct_vs_tailmatch(&cfg)?;
            write_compare_csv(&report.rows, sink(out.as_deref())?)?;
        }
    }
    Ok(())
}

fn sampler_name(s: HitArg) -> &'static str {
    match s {
        HitArg::Stationary => "stationary",
        HitArg::Oracle => "oracle",
        HitArg::Ula => "ula",
        HitArg::Mala => "mala",
    }
}

fn read_trace(path: &Path, d: usize) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        if row.len() != d {
            bail!("{}: line {} has {} columns, expected {d}", path.display(), i + 1, row.len());
        }
        out.push(row);
    }
    Ok(out)
}
