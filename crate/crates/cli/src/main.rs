use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use sparserec::evaluation::SyntheticParams;
use sparserec::Classifier;
use sparserec_cli::commands::{
    cmd_fit, cmd_flatten, cmd_gen_synthetic, cmd_identify, cmd_sweep_pcs, cmd_verify, display_name,
    verification_report,
};
use sparserec_cli::{parse_k_list, parse_tensor_shape, ModelBundle, RunConfig};

#[derive(Parser)]
#[command(name = "sparserec", version, about = "Sparsity augmented collaborative representation for feature-vector recognition")]
struct Cli {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// sacrc, crc, src or knn1 (identify takes a comma-separated list).
    #[arg(long, global = true)]
    classifier: Option<String>,
    /// K, retain:<fraction>, auto or off.
    #[arg(long, global = true)]
    pca: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<String>,
    /// OMP sparsity level (or `auto`).
    #[arg(long, global = true)]
    k: Option<String>,
    /// all-vs-all or pairs:<file>.
    #[arg(long, global = true)]
    protocol: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flatten a tensor feature file into a flat one.
    Flatten {
        input: PathBuf,
        /// Output feature file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit PCA and the dictionary on enrolment features.
    Fit {
        enrolment: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score probes and report EER, GMR and the ROC.
    Verify {
        probes: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank-1 identification accuracy per classifier.
    Identify {
        probes: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verification metrics for several numbers of principal components.
    SweepPcs {
        enrolment: PathBuf,
        probes: PathBuf,
        /// Comma-separated K values and start..end:step ranges.
        #[arg(long)]
        ks: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic union-of-subspaces enrolment and probe files.
    GenSynthetic {
        #[arg(long, default_value_t = 20)]
        classes: usize,
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        /// Defaults to --per-class.
        #[arg(long)]
        probes_per_class: Option<usize>,
        #[arg(long, default_value_t = 100)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        subspace_dim: usize,
        #[arg(long, default_value_t = 0.15)]
        noise: f64,
        /// Norm of the direction shared by all classes (default 3 sqrt(s)).
        #[arg(long)]
        shared_offset: Option<f64>,
        /// Write activation tensors of shape n1xn2xn instead of flat vectors.
        #[arg(long)]
        tensor_shape: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("SPARSEREC_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("SPARSEREC_THREADS=`{value}` must be a positive integer"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn build_config(cli: &Cli, identify: bool) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let flags = [
        ("seed", &cli.seed),
        ("pca", &cli.pca),
        ("lambda", &cli.lambda),
        ("sparsity_k", &cli.k),
        ("protocol", &cli.protocol),
        ("classifier", if identify { &None } else { &cli.classifier }),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            let flag = if key == "sparsity_k" { "k" } else { key };
            cfg.set(key, v).map_err(|e| anyhow::anyhow!("--{flag}: {e}"))?;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let identify = matches!(cli.command, Command::Identify { .. });
    let cfg = build_config(&cli, identify)?;
    match &cli.command {
        Command::Flatten { input, out } => {
            let flat = cmd_flatten(input, out)?;
            println!("wrote {} ({} vectors of dimension {})", out.display(), flat.len(), flat.layout.record_len());
        }
        Command::Fit { enrolment, out } => {
            let model = cmd_fit(enrolment, &cfg, out)?;
            println!(
                "wrote {} (dictionary {} x {}, {} classes)",
                out.join(sparserec_cli::commands::MODEL_FILE).display(),
                model.dictionary.dim(),
                model.dictionary.num_atoms(),
                model.dictionary.num_classes()
            );
        }
        Command::Verify { probes, model, out } => {
            let v = cmd_verify(probes, model, &cfg, out)?;
            let bundle = ModelBundle::read(model)?;
            print!("{}", verification_report(&v, &cfg, &bundle));
        }
        Command::Identify { probes, model, out } => {
            let classifiers = match &cli.classifier {
                None => Classifier::ALL.to_vec(),
                Some(list) => list
                    .split(',')
                    .map(|c| c.trim().parse::<Classifier>())
                    .collect::<Result<Vec<_>, _>>()
                    .context("--classifier")?,
            };
            for r in cmd_identify(probes, model, &cfg, &classifiers, out)? {
                println!("{:<12}  {:>6.2}%", display_name(r.classifier), 100.0 * r.accuracy());
            }
        }
        Command::SweepPcs { enrolment, probes, ks, out } => {
            let ks = parse_k_list(ks).map_err(|e| anyhow::anyhow!("--ks: {e}"))?;
            for r in cmd_sweep_pcs(enrolment, probes, &ks, &cfg, out)? {
                print!("K={:<6} EER={:.2}%", r.k, 100.0 * r.metrics.eer);
                for g in &r.metrics.gmr_at_far {
                    print!("  GMR@FAR={}={:.2}%", g.far_target, 100.0 * g.gmr);
                }
                println!();
            }
        }
        Command::GenSynthetic {
            classes,
            per_class,
            probes_per_class,
            dim,
            subspace_dim,
            noise,
            shared_offset,
            tensor_shape,
            out,
        } => {
            let mut params = SyntheticParams::new(*classes, *per_class, *dim, *subspace_dim, *noise, cfg.seed);
            if let Some(p) = probes_per_class {
                params.probes_per_class = *p;
            }
            if let Some(s) = shared_offset {
                params.shared_offset = *s;
            }
            let shape = match tensor_shape {
                Some(s) => Some(parse_tensor_shape(s).map_err(|e| anyhow::anyhow!("--tensor-shape: {e}"))?),
                None => None,
            };
            let (enrolment, probes) = cmd_gen_synthetic(&params, shape, out)?;
            println!("wrote {} and {}", enrolment.display(), probes.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
