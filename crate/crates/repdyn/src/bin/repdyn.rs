//! Command-line front end: every experiment stage as a subcommand, each
//! producing its artifacts plus one reproducibility manifest.
//!
//! Exit codes: 2 usage (bad flags/arguments), 3 parse (missing or corrupt
//! input files), 4 numerical (training or linear-algebra failure).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use repdyn::datasets::{gen_yinyang, YinYangSpec};
use repdyn::editing::{run_edit, EditPlan};
use repdyn::error::Error;
use repdyn::io::{
    load_dataset, load_kae, load_mlp, load_pair, load_representation, parse_config,
    save_dataset, save_kae, save_mlp, save_operator, save_pair, save_representation,
    write_betti_csv, write_diagram_csv, write_kae_loss_csv, write_metrics_csv,
    write_projection_csv, KaeCheckpoint, RunConfig, RunManifest,
};
use repdyn::kae::{surrogate_accuracy, train_kae, KaeModel};
use repdyn::linalg::procrustes_rotation;
use repdyn::preprocess::{fit_pair, pca_project};
use repdyn::resnet::{capture_layers, evaluate, train_mlp, RepresentationSet, ResidualMlpModel};
use repdyn::topology::{betti_curve, subsample, vr_persistence, PointCloud};
use repdyn::Result;

#[derive(Parser)]
#[command(
    name = "repdyn",
    version,
    about = "Koopman-autoencoder surrogates of neural representation dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset archive (currently: `yinyang`).
    GenData {
        /// Dataset family to generate.
        dataset: String,
        /// Number of samples.
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output archive path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse the four MNIST IDX files into train/test archives.
    LoadMnist {
        /// Directory holding the IDX files (plain or .gz).
        #[arg(long)]
        dir: PathBuf,
        /// Output directory for mnist-train.kta / mnist-test.kta.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a residual MLP on a dataset archive.
    TrainMlp {
        #[arg(long)]
        data: PathBuf,
        /// Optional held-out dataset evaluated during training.
        #[arg(long)]
        test: Option<PathBuf>,
        /// `key = value` overrides of the per-dataset defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model archive path (metrics CSV lands beside it).
        #[arg(long)]
        out: PathBuf,
    },
    /// Capture every layer representation of a dataset under a model.
    Capture {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Path prefix: writes `<out>.layer<L>.kta` per layer.
        #[arg(long)]
        out: String,
    },
    /// Fit the preprocessing pipeline on a representation pair.
    Preprocess {
        #[arg(long)]
        reps_i: PathBuf,
        #[arg(long)]
        reps_j: PathBuf,
        /// PCA dimension kept on each side.
        #[arg(long)]
        q: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the Koopman autoencoder on a preprocessed pair.
    TrainKae {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint path (loss CSV lands beside it).
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate surrogate top-1 accuracy through the host's head.
    EvalSurrogate {
        #[arg(long)]
        kae: PathBuf,
        #[arg(long)]
        mlp: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Also write the accuracy JSON here (stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode every intermediate operator step into state space.
    Interpolate {
        #[arg(long)]
        kae: PathBuf,
        /// Override the checkpoint's step count k.
        #[arg(long)]
        k: Option<usize>,
        /// Pair archive to draw inputs from (defaults to the one recorded
        /// in the checkpoint).
        #[arg(long)]
        pair: Option<PathBuf>,
        /// Decode only this many uniformly sampled rows.
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Vietoris-Rips persistence diagram and Betti curves of a cloud.
    Topology {
        /// Representation archive to analyze.
        #[arg(long)]
        reps: PathBuf,
        /// Highest homology dimension (0 or 1).
        #[arg(long, default_value_t = 1)]
        max_dim: usize,
        /// Filtration range limit.
        #[arg(long)]
        eps_max: f64,
        /// Betti grid: comma-separated epsilons, or a point count for an
        /// even grid over (0, eps-max].
        #[arg(long)]
        grid: Option<String>,
        /// Analyze a uniform subsample of this many points.
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Path prefix: writes `<out>.diagram.csv` and `<out>.betti.csv`.
        #[arg(long)]
        out: String,
    },
    /// Project a representation cloud onto its top principal components.
    ProjectPca {
        #[arg(long)]
        reps: PathBuf,
        #[arg(long, default_value_t = 3)]
        components: usize,
        /// Procrustes-align the projection onto this archive's projection
        /// (row-aligned clouds only).
        #[arg(long)]
        align_to: Option<PathBuf>,
        /// Projection CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Unlearn a class by editing the Koopman operator in closed form.
    Edit {
        #[arg(long)]
        kae: PathBuf,
        #[arg(long)]
        mlp: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Class to forget.
        #[arg(long)]
        forget: usize,
        /// Class whose cluster absorbs the forgotten inputs.
        #[arg(long)]
        merge_into: usize,
        #[arg(long)]
        ridge: Option<f64>,
        /// Cap on the number of edit keys.
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Path prefix: writes `<out>.edit.json` and `<out>.operator.kta`.
        #[arg(long)]
        out: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match &err {
                Error::InvalidArgument(_) => 2,
                Error::Io(_) | Error::Data(_) => 3,
                Error::Linalg(_) | Error::Train(_) | Error::Topology(_) | Error::Edit(_) => 4,
            })
        }
    }
}

fn run(command: Command) -> Result<()> {
    let started = Instant::now();
    match command {
        Command::GenData {
            dataset,
            n,
            seed,
            out,
        } => cmd_gen_data(&dataset, n, seed, &out, started),
        Command::LoadMnist { dir, out } => cmd_load_mnist(&dir, &out, started),
        Command::TrainMlp {
            data,
            test,
            config,
            out,
        } => cmd_train_mlp(&data, test.as_deref(), config.as_deref(), &out, started),
        Command::Capture { model, data, out } => cmd_capture(&model, &data, &out, started),
        Command::Preprocess {
            reps_i,
            reps_j,
            q,
            out,
        } => cmd_preprocess(&reps_i, &reps_j, q, &out, started),
        Command::TrainKae { pair, config, out } => {
            cmd_train_kae(&pair, config.as_deref(), &out, started)
        }
        Command::EvalSurrogate {
            kae,
            mlp,
            data,
            out,
        } => cmd_eval_surrogate(&kae, &mlp, &data, out.as_deref(), started),
        Command::Interpolate {
            kae,
            k,
            pair,
            subsample,
            seed,
            out_dir,
        } => cmd_interpolate(&kae, k, pair.as_deref(), subsample, seed, &out_dir, started),
        Command::Topology {
            reps,
            max_dim,
            eps_max,
            grid,
            subsample,
            seed,
            out,
        } => cmd_topology(
            &reps,
            max_dim,
            eps_max,
            grid.as_deref(),
            subsample,
            seed,
            &out,
            started,
        ),
        Command::ProjectPca {
            reps,
            components,
            align_to,
            out,
        } => cmd_project_pca(&reps, components, align_to.as_deref(), &out, started),
        Command::Edit {
            kae,
            mlp,
            data,
            forget,
            merge_into,
            ridge,
            subsample,
            seed,
            out,
        } => cmd_edit(
            &kae, &mlp, &data, forget, merge_into, ridge, subsample, seed, &out, started,
        ),
    }
}

// ----------------------------------------------------------------- helpers

/// Loads the per-dataset defaults, overlays the optional config file, and
/// records both in the manifest.
fn effective_config(
    dataset: &str,
    config: Option<&Path>,
    manifest: &mut RunManifest,
) -> Result<RunConfig> {
    let mut cfg = RunConfig::defaults_for(dataset);
    if let Some(path) = config {
        let text = std::fs::read_to_string(path).map_err(|source| {
            Error::Io(repdyn::error::IoError::Io {
                path: path.display().to_string(),
                source,
            })
        })?;
        cfg.apply(&parse_config(&text)?)?;
        manifest.record_input(path)?;
    }
    manifest.config = cfg.snapshot();
    Ok(cfg)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| {
        Error::Io(repdyn::error::IoError::Io {
            path: path.display().to_string(),
            source,
        })
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| {
        Error::Io(repdyn::error::IoError::Io {
            path: path.display().to_string(),
            source,
        })
    })
}

fn finalize(mut manifest: RunManifest, beside: &Path, started: Instant) -> Result<()> {
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write_beside(beside)?;
    Ok(())
}

fn accuracy_json(overall: f64, per_class: &[f64], seed: u64) -> serde_json::Value {
    let table: serde_json::Map<String, serde_json::Value> = per_class
        .iter()
        .enumerate()
        .map(|(c, a)| (c.to_string(), serde_json::json!(a)))
        .collect();
    serde_json::json!({ "overall": overall, "per_class": table, "seed": seed })
}

// ---------------------------------------------------------------- commands

fn cmd_gen_data(dataset: &str, n: usize, seed: u64, out: &Path, started: Instant) -> Result<()> {
    if dataset != "yinyang" {
        return Err(Error::InvalidArgument(format!(
            "unknown dataset family `{dataset}` (supported: yinyang)"
        )));
    }
    let data = gen_yinyang(&YinYangSpec::new(n, seed));
    save_dataset(&data, out)?;
    let mut manifest = RunManifest::new("gen-data");
    manifest.config.insert("dataset".into(), dataset.into());
    manifest.config.insert("n".into(), n.to_string());
    manifest.seeds.insert("data".into(), seed);
    manifest.record_artifact(out);
    println!("wrote {} ({} samples)", out.display(), data.len());
    finalize(manifest, out, started)
}

fn cmd_load_mnist(dir: &Path, out: &Path, started: Instant) -> Result<()> {
    create_dir(out)?;
    let (train, test) = repdyn::datasets::load_mnist(dir)?;
    let train_path = out.join("mnist-train.kta");
    let test_path = out.join("mnist-test.kta");
    save_dataset(&train, &train_path)?;
    save_dataset(&test, &test_path)?;
    let mut manifest = RunManifest::new("load-mnist");
    for name in [
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    ] {
        let plain = dir.join(name);
        let gz = dir.join(format!("{name}.gz"));
        manifest.record_input(if plain.exists() { &plain } else { &gz })?;
    }
    manifest.record_artifact(&train_path);
    manifest.record_artifact(&test_path);
    println!(
        "wrote {} ({} rows) and {} ({} rows)",
        train_path.display(),
        train.len(),
        test_path.display(),
        test.len()
    );
    finalize(manifest, &train_path, started)
}

fn cmd_train_mlp(
    data: &Path,
    test: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
    started: Instant,
) -> Result<()> {
    let mut manifest = RunManifest::new("train-mlp");
    manifest.record_input(data)?;
    let train = load_dataset(data)?;
    let test_set = match test {
        Some(path) => {
            manifest.record_input(path)?;
            Some(load_dataset(path)?)
        }
        None => None,
    };
    let cfg = effective_config(&train.name, config, &mut manifest)?;
    manifest.seeds.insert("mlp".into(), cfg.mlp.cfg.seed);

    let mut model = ResidualMlpModel::<f32>::new(
        train.dim(),
        cfg.mlp.width,
        cfg.mlp.blocks,
        train.num_classes(),
        cfg.mlp.cfg.seed,
    );
    let history = train_mlp(&mut model, &train, test_set.as_ref(), &cfg.mlp.cfg)?;
    save_mlp(&model, &train.name, out)?;
    let metrics_path = out.with_extension("metrics.csv");
    write_metrics_csv(&metrics_path, &history)?;
    manifest.record_artifact(out);
    manifest.record_artifact(&metrics_path);

    if let Some(last) = history.last() {
        match last.test_accuracy {
            Some(t) => println!(
                "epoch {}: train {:.2}%, test {:.2}%",
                last.epoch, last.train_accuracy, t
            ),
            None => println!("epoch {}: train {:.2}%", last.epoch, last.train_accuracy),
        }
    }
    println!("wrote {}", out.display());
    finalize(manifest, out, started)
}

fn cmd_capture(model_path: &Path, data: &Path, out: &str, started: Instant) -> Result<()> {
    let mut manifest = RunManifest::new("capture");
    manifest.record_input(model_path)?;
    manifest.record_input(data)?;
    let (model, _) = load_mlp(model_path)?;
    let dataset = load_dataset(data)?;
    let layers: Vec<usize> = (0..=model.blocks.len()).collect();
    let reps = capture_layers(&model, &dataset, &layers);
    for set in &reps {
        let path = PathBuf::from(format!("{out}.layer{}.kta", set.layer));
        save_representation(set, &dataset.name, &path)?;
        manifest.record_artifact(&path);
        println!("wrote {}", path.display());
    }
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(Path::new(&format!("{out}.manifest.json")))?;
    Ok(())
}

fn cmd_preprocess(
    reps_i: &Path,
    reps_j: &Path,
    q: usize,
    out: &Path,
    started: Instant,
) -> Result<()> {
    let mut manifest = RunManifest::new("preprocess");
    manifest.record_input(reps_i)?;
    manifest.record_input(reps_j)?;
    let (set_i, name) = load_representation(reps_i)?;
    let (set_j, _) = load_representation(reps_j)?;
    let pair = fit_pair(&set_i, &set_j, q)?;
    save_pair(&pair, &set_i.labels, &name, out)?;
    manifest.config.insert("q".into(), q.to_string());
    manifest
        .config
        .insert("layer_i".into(), set_i.layer.to_string());
    manifest
        .config
        .insert("layer_j".into(), set_j.layer.to_string());
    manifest.record_artifact(out);
    println!(
        "wrote {} (layers {} -> {}, q = {q})",
        out.display(),
        set_i.layer,
        set_j.layer
    );
    finalize(manifest, out, started)
}

fn cmd_train_kae(
    pair_path: &Path,
    config: Option<&Path>,
    out: &Path,
    started: Instant,
) -> Result<()> {
    let mut manifest = RunManifest::new("train-kae");
    manifest.record_input(pair_path)?;
    let (pair, _labels, name) = load_pair(pair_path)?;
    let cfg = effective_config(&name, config, &mut manifest)?;
    manifest.seeds.insert("kae".into(), cfg.kae.cfg.seed);

    let d = pair.xhat_i.cols();
    let mut model = KaeModel::<f32>::new(
        d,
        cfg.kae.hidden,
        cfg.kae.observable_dim,
        cfg.kae.cfg.seed,
    );
    model.k_steps = cfg.kae.k_steps;
    let history = train_kae(
        &mut model,
        &pair.xhat_i.to_f32(),
        &pair.xhat_j.to_f32(),
        &cfg.kae.cfg,
    )?;
    let ckpt = KaeCheckpoint {
        model,
        t_i: pair.t_i.clone(),
        t_j: pair.t_j.clone(),
        pair_path: pair_path.display().to_string(),
        dataset: name,
    };
    save_kae(&ckpt, out)?;
    let loss_path = out.with_extension("loss.csv");
    write_kae_loss_csv(&loss_path, &history)?;
    manifest.record_artifact(out);
    manifest.record_artifact(&loss_path);
    if let Some(last) = history.last() {
        println!(
            "final losses: total {:.3e} (recon {:.3e}, linear {:.3e}, state {:.3e}, dist {:.3e})",
            last.total, last.recon, last.linear, last.state, last.dist
        );
    }
    println!("wrote {}", out.display());
    finalize(manifest, out, started)
}

fn cmd_eval_surrogate(
    kae: &Path,
    mlp_path: &Path,
    data: &Path,
    out: Option<&Path>,
    started: Instant,
) -> Result<()> {
    let ckpt = load_kae(kae)?;
    let (mlp, _) = load_mlp(mlp_path)?;
    let dataset = load_dataset(data)?;
    let report = surrogate_accuracy(&ckpt.model, &ckpt.t_i, &ckpt.t_j, &mlp, &dataset)?;
    let host = evaluate(&mlp, &dataset);
    let json = accuracy_json(report.overall, &report.per_class, dataset.seed);
    println!("{}", serde_json::to_string_pretty(&json).map_err(repdyn::error::IoError::Json)?);
    eprintln!(
        "surrogate {:.2}% vs host {:.2}%",
        report.overall, host.overall
    );
    if let Some(path) = out {
        let mut manifest = RunManifest::new("eval-surrogate");
        manifest.record_input(kae)?;
        manifest.record_input(mlp_path)?;
        manifest.record_input(data)?;
        write_text(
            path,
            &serde_json::to_string_pretty(&json).map_err(repdyn::error::IoError::Json)?,
        )?;
        manifest.record_artifact(path);
        finalize(manifest, path, started)?;
    }
    Ok(())
}

fn cmd_interpolate(
    kae: &Path,
    k: Option<usize>,
    pair_flag: Option<&Path>,
    sample: Option<usize>,
    seed: u64,
    out_dir: &Path,
    started: Instant,
) -> Result<()> {
    let mut manifest = RunManifest::new("interpolate");
    manifest.record_input(kae)?;
    let mut ckpt = load_kae(kae)?;
    if let Some(k) = k {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        ckpt.model.k_steps = k;
    }
    // Inputs come from the pair archive recorded at training time unless
    // overridden; a relative recorded path is tried beside the checkpoint
    // as a fallback.
    let pair_path = match pair_flag {
        Some(p) => p.to_path_buf(),
        None => {
            let recorded = PathBuf::from(&ckpt.pair_path);
            if recorded.exists() {
                recorded
            } else {
                kae.parent().unwrap_or(Path::new(".")).join(&ckpt.pair_path)
            }
        }
    };
    manifest.record_input(&pair_path)?;
    let (pair, labels, name) = load_pair(&pair_path)?;

    let (xhat, labels) = match sample {
        Some(m) => {
            let cloud = PointCloud::new(pair.xhat_i.clone(), Some(labels))?;
            let sampled = subsample(&cloud, m, seed)?;
            let l = sampled.labels.clone().unwrap_or_default();
            (sampled.points, l)
        }
        None => (pair.xhat_i.clone(), labels),
    };
    manifest.seeds.insert("subsample".into(), seed);
    manifest
        .config
        .insert("k".into(), ckpt.model.k_steps.to_string());
    manifest.config.insert("rows".into(), xhat.rows().to_string());

    create_dir(out_dir)?;
    let x = xhat.to_f32();
    for m in 0..=ckpt.model.k_steps {
        let decoded = ckpt.model.interpolate(&x, m)?;
        let set = RepresentationSet {
            layer: m,
            features: decoded,
            labels: labels.clone(),
        };
        let path = out_dir.join(format!("step{m:03}.kta"));
        save_representation(&set, &name, &path)?;
        manifest.record_artifact(&path);
    }
    println!(
        "wrote {} step archives to {}",
        ckpt.model.k_steps + 1,
        out_dir.display()
    );
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(&out_dir.join("interpolate.manifest.json"))?;
    Ok(())
}

fn parse_grid(spec: Option<&str>, eps_max: f64) -> Result<Vec<f64>> {
    let grid = match spec {
        None => (1..=32).map(|t| eps_max * t as f64 / 32.0).collect(),
        Some(s) if s.contains(',') || s.contains('.') => {
            let mut grid = Vec::new();
            for part in s.split(',') {
                let v: f64 = part.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("bad grid value `{}`", part.trim()))
                })?;
                grid.push(v);
            }
            grid.sort_by(|a, b| a.total_cmp(b));
            grid
        }
        Some(s) => {
            let count: usize = s
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad grid spec `{s}`")))?;
            if count == 0 {
                return Err(Error::InvalidArgument("grid count must be positive".into()));
            }
            (1..=count)
                .map(|t| eps_max * t as f64 / count as f64)
                .collect()
        }
    };
    Ok(grid)
}

#[allow(clippy::too_many_arguments)]
fn cmd_topology(
    reps: &Path,
    max_dim: usize,
    eps_max: f64,
    grid_spec: Option<&str>,
    sample: Option<usize>,
    seed: u64,
    out: &str,
    started: Instant,
) -> Result<()> {
    let mut manifest = RunManifest::new("topology");
    manifest.record_input(reps)?;
    let (set, _) = load_representation(reps)?;
    let mut cloud = PointCloud::new(set.features.to_f64(), Some(set.labels))?;
    if let Some(m) = sample {
        cloud = subsample(&cloud, m, seed)?;
    }
    let grid = parse_grid(grid_spec, eps_max)?;
    let pairs = vr_persistence(&cloud, eps_max, max_dim)?;

    let diagram_path = PathBuf::from(format!("{out}.diagram.csv"));
    write_diagram_csv(&diagram_path, &pairs)?;
    let curves = (0..=max_dim)
        .map(|dim| betti_curve(&pairs, dim, &grid))
        .collect::<Result<Vec<_>>>()?;
    let betti_path = PathBuf::from(format!("{out}.betti.csv"));
    write_betti_csv(&betti_path, &curves)?;

    manifest.seeds.insert("subsample".into(), seed);
    manifest.config.insert("max_dim".into(), max_dim.to_string());
    manifest.config.insert("eps_max".into(), eps_max.to_string());
    manifest.config.insert("points".into(), cloud.len().to_string());
    manifest.record_artifact(&diagram_path);
    manifest.record_artifact(&betti_path);
    println!(
        "{} points, {} pairs; wrote {} and {}",
        cloud.len(),
        pairs.len(),
        diagram_path.display(),
        betti_path.display()
    );
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(Path::new(&format!("{out}.manifest.json")))?;
    Ok(())
}

fn cmd_project_pca(
    reps: &Path,
    components: usize,
    align_to: Option<&Path>,
    out: &Path,
    started: Instant,
) -> Result<()> {
    let mut manifest = RunManifest::new("project-pca");
    manifest.record_input(reps)?;
    let (set, _) = load_representation(reps)?;
    let mut proj = pca_project(&set.features.to_f64(), components)?;
    if let Some(reference) = align_to {
        manifest.record_input(reference)?;
        let (ref_set, _) = load_representation(reference)?;
        let ref_proj = pca_project(&ref_set.features.to_f64(), components)?;
        let rotation = procrustes_rotation(&proj, &ref_proj)?;
        proj = proj.matmul(&rotation);
    }
    write_projection_csv(out, &proj, &set.labels)?;
    manifest
        .config
        .insert("components".into(), components.to_string());
    manifest.record_artifact(out);
    println!("wrote {}", out.display());
    finalize(manifest, out, started)
}

#[allow(clippy::too_many_arguments)]
fn cmd_edit(
    kae: &Path,
    mlp_path: &Path,
    data: &Path,
    forget: usize,
    merge_into: usize,
    ridge: Option<f64>,
    sample: Option<usize>,
    seed: u64,
    out: &str,
    started: Instant,
) -> Result<()> {
    let mut manifest = RunManifest::new("edit");
    manifest.record_input(kae)?;
    manifest.record_input(mlp_path)?;
    manifest.record_input(data)?;
    let ckpt = load_kae(kae)?;
    let (mlp, _) = load_mlp(mlp_path)?;
    let dataset = load_dataset(data)?;

    let mut plan = EditPlan::new(forget, merge_into);
    if let Some(r) = ridge {
        plan.ridge = r;
    }
    if let Some(m) = sample {
        plan.subsample_edits = m;
    }
    plan.seed = seed;
    let result = run_edit(&ckpt.model, &mlp, (&ckpt.t_i, &ckpt.t_j), &dataset, &plan)?;

    let json_path = PathBuf::from(format!("{out}.edit.json"));
    write_text(
        &json_path,
        &serde_json::to_string_pretty(&result.to_json())
            .map_err(repdyn::error::IoError::Json)?,
    )?;
    let op_path = PathBuf::from(format!("{out}.operator.kta"));
    save_operator(&result.edited_operator, &op_path)?;

    manifest.seeds.insert("edit".into(), seed);
    manifest.config.insert("forget".into(), forget.to_string());
    manifest
        .config
        .insert("merge_into".into(), merge_into.to_string());
    manifest.config.insert("ridge".into(), plan.ridge.to_string());
    manifest
        .config
        .insert("subsample".into(), plan.subsample_edits.to_string());
    manifest.record_artifact(&json_path);
    manifest.record_artifact(&op_path);
    println!(
        "class {forget}: {:.2}% -> {:.2}%; others mean {:.2}% -> {:.2}% (relative residual {:.3e})",
        result.before.per_class[forget],
        result.after.per_class[forget],
        mean_excluding(&result.before.per_class, forget),
        mean_excluding(&result.after.per_class, forget),
        result.relative_residual
    );
    println!("wrote {} and {}", json_path.display(), op_path.display());
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(Path::new(&format!("{out}.manifest.json")))?;
    Ok(())
}

fn mean_excluding(per_class: &[f64], skip: usize) -> f64 {
    let rest: Vec<f64> = per_class
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != skip)
        .map(|(_, &a)| a)
        .collect();
    rest.iter().sum::<f64>() / rest.len().max(1) as f64
}
