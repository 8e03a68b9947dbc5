use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ttc::{generate, preset, run, run_with_state, ExperimentConfig, Preset};

#[derive(Parser)]
#[command(
    name = "ttc",
    about = "Third-order tensor completion in the tensor-train format"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic instance and write the data files
    Gen(CommonOpts),
    /// Run the Riemannian CG solver and write the trace
    Complete(CommonOpts),
    /// Solve and estimate the TT-rank from the gradient side matrices
    Estimate(CommonOpts),
    /// Run one of the three bundled experiment presets
    Reproduce {
        /// fig1 (converged), fig2 (early stop), or fig3 (noisy)
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quick end-to-end health check
    Selftest,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// JSON config file mirroring the experiment configuration; flags
    /// override individual fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tensor dimensions: "n" for a cube or "n1,n2,n3"
    #[arg(long, value_parser = parse_dims)]
    dims: Option<[usize; 3]>,
    /// Solve rank "r1,r2" (or "r" for equal ranks)
    #[arg(long, value_parser = parse_rank)]
    rank: Option<(usize, usize)>,
    /// Rank of the generated data tensor
    #[arg(long = "true-rank", value_parser = parse_rank)]
    true_rank: Option<(usize, usize)>,
    /// Number of observed entries
    #[arg(long)]
    samples: Option<usize>,
    /// Number of held-out test entries
    #[arg(long = "test-samples")]
    test_samples: Option<usize>,
    /// Noise level on observed entries
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    /// Stop when the squared Riemannian gradient norm drops below this
    #[arg(long = "grad-tol-sq")]
    grad_tol_sq: Option<f64>,
    /// Cap on the singular-value gap search of the rank estimator
    #[arg(long = "cap-s")]
    cap_s: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_dims(s: &str) -> anyhow::Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split([',', 'x'])
        .map(|p| p.trim().parse().context("bad dimension"))
        .collect::<anyhow::Result<_>>()?;
    match parts.as_slice() {
        [n] => Ok([*n, *n, *n]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => bail!("expected one or three dimensions, got {s:?}"),
    }
}

fn parse_rank(s: &str) -> anyhow::Result<(usize, usize)> {
    let parts: Vec<usize> = s
        .split([',', 'x'])
        .map(|p| p.trim().parse().context("bad rank"))
        .collect::<anyhow::Result<_>>()?;
    match parts.as_slice() {
        [r] => Ok((*r, *r)),
        [a, b] => Ok((*a, *b)),
        _ => bail!("expected one or two ranks, got {s:?}"),
    }
}

fn default_config() -> ExperimentConfig {
    ExperimentConfig {
        dims: [20, 20, 20],
        solve_rank: (2, 2),
        true_rank: (4, 4),
        num_samples: 4000,
        num_test: 1000,
        noise: 0.0,
        seed: 0,
        solver: Default::default(),
        estimator: Default::default(),
    }
}

fn build_config(opts: &CommonOpts) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => default_config(),
    };
    if let Some(d) = opts.dims {
        cfg.dims = d;
    }
    if let Some(r) = opts.rank {
        cfg.solve_rank = r;
    }
    if let Some(r) = opts.true_rank {
        cfg.true_rank = r;
    }
    if let Some(m) = opts.samples {
        cfg.num_samples = m;
    }
    if let Some(t) = opts.test_samples {
        cfg.num_test = t;
    }
    if let Some(e) = opts.noise {
        cfg.noise = e;
    }
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(k) = opts.max_iters {
        cfg.solver.max_iters = k;
    }
    if let Some(g) = opts.grad_tol_sq {
        cfg.solver.grad_tol_sq = g;
    }
    if let Some(s) = opts.cap_s {
        cfg.estimator.s = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_parse_cube_and_triple() {
        assert_eq!(parse_dims("100").unwrap(), [100, 100, 100]);
        assert_eq!(parse_dims("3,4,5").unwrap(), [3, 4, 5]);
        assert_eq!(parse_dims("3x4x5").unwrap(), [3, 4, 5]);
        assert!(parse_dims("3,4").is_err());
        assert!(parse_dims("abc").is_err());
    }

    #[test]
    fn rank_parse_single_and_pair() {
        assert_eq!(parse_rank("2").unwrap(), (2, 2));
        assert_eq!(parse_rank("2,3").unwrap(), (2, 3));
        assert!(parse_rank("1,2,3").is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        let mut cfg = default_config();
        cfg.noise = 2.5;
        cfg.seed = 7;
        std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();

        let opts = CommonOpts {
            config: Some(path),
            dims: None,
            rank: None,
            true_rank: None,
            samples: Some(1234),
            test_samples: None,
            noise: None,
            seed: None,
            max_iters: Some(5),
            grad_tol_sq: None,
            cap_s: Some(3),
            out: PathBuf::from("out"),
        };
        let merged = build_config(&opts).unwrap();
        // file values survive where no flag was given
        assert_eq!(merged.noise, 2.5);
        assert_eq!(merged.seed, 7);
        // flags win where given
        assert_eq!(merged.num_samples, 1234);
        assert_eq!(merged.solver.max_iters, 5);
        assert_eq!(merged.estimator.s, 3);
    }

    #[test]
    fn oversampled_config_is_rejected() {
        let opts = CommonOpts {
            config: None,
            dims: Some([4, 4, 4]),
            rank: None,
            true_rank: Some((2, 2)),
            samples: Some(1000),
            test_samples: None,
            noise: None,
            seed: None,
            max_iters: None,
            grad_tol_sq: None,
            cap_s: None,
            out: PathBuf::from("out"),
        };
        assert!(build_config(&opts).is_err());
    }
}

fn echo_config(cfg: &ExperimentConfig, dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("config.echo.json"),
        serde_json::to_string_pretty(cfg)?,
    )?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::Gen(opts) => {
            let cfg = build_config(&opts)?;
            let data = generate(&cfg)?;
            echo_config(&cfg, &opts.out)?;
            data.a.write_binary(&opts.out.join("a.tt"))?;
            data.train.write_csv(&opts.out.join("train.csv"))?;
            data.test.write_csv(&opts.out.join("test.csv"))?;
            println!(
                "wrote {} training and {} test samples to {}",
                data.train.len(),
                data.test.len(),
                opts.out.display()
            );
        }
        Cmd::Complete(opts) => {
            let cfg = build_config(&opts)?;
            let (summary, x, trace) = run_with_state(&cfg)?;
            echo_config(&cfg, &opts.out)?;
            trace.write_csv(&opts.out.join("trace.csv"))?;
            x.to_tt().write_binary(&opts.out.join("x.tt"))?;
            println!(
                "{:?} after {} iterations: f = {:.6e}, |grad|^2 = {:.6e}",
                summary.outcome, summary.iterations, summary.final_f, summary.final_grad_norm_sq
            );
        }
        Cmd::Estimate(opts) => {
            let cfg = build_config(&opts)?;
            let summary = run(&cfg, Some(&opts.out))?;
            println!(
                "proposed rank ({}, {}) from base ({}, {}); naive left-unfolding estimate {}",
                summary.estimate.proposed.0,
                summary.estimate.proposed.1,
                summary.estimate.base_rank.0,
                summary.estimate.base_rank.1,
                summary.naive_left_rank
            );
        }
        Cmd::Reproduce { preset: name, seed, out } => {
            let which: Preset = name.parse()?;
            let cfg = preset(which, seed);
            let out = out.unwrap_or_else(|| PathBuf::from(format!("out/{name}-seed{seed}")));
            let summary = run(&cfg, Some(&out))?;
            println!(
                "{name} seed {seed}: {:?} after {} iterations, |grad|^2 = {:.3e}, proposed rank ({}, {}), naive {}",
                summary.outcome,
                summary.iterations,
                summary.final_grad_norm_sq,
                summary.estimate.proposed.0,
                summary.estimate.proposed.1,
                summary.naive_left_rank
            );
        }
        Cmd::Selftest => {
            let checks = ttc::selftest()?;
            let mut ok = true;
            for (name, pass) in &checks {
                println!("[{}] {}", if *pass { "pass" } else { "FAIL" }, name);
                ok &= *pass;
            }
            if !ok {
                bail!("selftest failed");
            }
        }
    }
    Ok(())
}
