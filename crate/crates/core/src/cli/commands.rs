use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;

use super::dataset::{
    gen_synthetic, load_csv, normalize_unit_sphere, write_csv, Dataset, SyntheticKind, SyntheticParams,
};
use super::model_file::{
    load_model, save_model, KernelDescriptor, KpcaPayload, KrrPayload, ModelFile, ModelKind, Pretraining, SvcPayload,
    SvrPayload,
};
use crate::classical_kernels::ClassicalKernel;
use crate::error::{Error, Result};
use crate::featuremap::{DataAxis, Entanglement, FeatureMapSpec, ParamVector, TrainableAxis};
use crate::kernel_methods::{kernel_kmeans, kpca_fit, krr_fit, svc_fit, svr_fit};
use crate::qkernel::{KernelEngineConfig, OverlapCircuit};
use crate::training::{export_embedding, mlkrr_fit, qka_align, MlkrrConfig, SpsaConfig, TaskKind};

#[derive(Debug, Parser)]
#[command(name = "qkflow", version, about = "Variational quantum kernels and kernel machines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset as CSV.
    GenData(GenDataArgs),
    /// Write a Gram matrix, or a test x train cross-Gram matrix, as CSV.
    Kernel(KernelArgs),
    /// Align a quantum feature map to labelled data and export the embedding.
    Align(AlignArgs),
    /// Fit an SVC, KRR or SVR model.
    Train(TrainArgs),
    /// Learn the metric of a Gaussian kernel for ridge regression.
    Mlkrr(MlkrrArgs),
    /// Apply a saved model to a dataset.
    Predict(PredictArgs),
    /// Project a dataset onto kernel principal components.
    Kpca(KpcaArgs),
    /// Cluster a dataset with kernel k-means.
    Cluster(ClusterArgs),
}

/// Parses a value through the serde name of `T` (`rx`, `linear_chain`, ...).
fn parse_name<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|_| format!("unknown value '{s}'"))
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// blobs, circles or hidden_rotation
    #[arg(long, value_parser = parse_name::<SyntheticKind>)]
    kind: SyntheticKind,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    theta_star: f64,
}

#[derive(Debug, Args)]
pub struct QuantumOpts {
    #[arg(long, default_value_t = 1)]
    qubits: usize,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, value_parser = parse_name::<DataAxis>, default_value = "rx")]
    data_axis: DataAxis,
    #[arg(long, value_parser = parse_name::<TrainableAxis>, default_value = "ry")]
    trainable_axis: TrainableAxis,
    #[arg(long, value_parser = parse_name::<Entanglement>, default_value = "linear_chain")]
    entanglement: Entanglement,
    #[arg(long, default_value_t = 1.0)]
    scaling: f64,
    /// Estimate kernel entries from this many shots instead of exactly.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, value_parser = parse_name::<OverlapCircuit>, default_value = "inversion")]
    circuit: OverlapCircuit,
}

impl QuantumOpts {
    fn spec(&self) -> FeatureMapSpec {
        FeatureMapSpec::new(
            self.qubits,
            self.layers,
            self.data_axis,
            self.trainable_axis,
            self.entanglement,
        )
        .with_scaling(self.scaling)
    }

    fn engine(&self, params: ParamVector, seed: u64) -> Result<KernelEngineConfig> {
        let mut cfg = KernelEngineConfig::exact(self.spec(), params).with_circuit(self.circuit);
        if let Some(shots) = self.shots {
            cfg = cfg.with_shots(shots, sub_seed(seed, "shots"));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KernelKind {
    Linear,
    Polynomial,
    Exponential,
    Gaussian,
    Quantum,
}

#[derive(Debug, Args)]
pub struct KernelOpts {
    /// Kernel family (default gaussian).
    #[arg(long, value_enum)]
    kernel: Option<KernelKind>,
    /// Pretrained embedding to use as the kernel.
    #[arg(long, conflicts_with = "kernel")]
    embedding: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Offset `c` of the linear and polynomial kernels.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    coef0: f64,
    #[arg(long, default_value_t = 2)]
    degree: u32,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Scale every row to unit norm first (needed by the exponential kernel).
    #[arg(long)]
    unit_sphere: bool,
    /// Quantum encoding angles, comma separated (default all zero).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    params: Option<Vec<f64>>,
    #[command(flatten)]
    quantum: QuantumOpts,
}

impl KernelOpts {
    fn resolve(&self, dim: usize, seed: u64) -> Result<(KernelDescriptor, Option<Pretraining>)> {
        if let Some(path) = &self.embedding {
            let file = load_model(path)?;
            file.to_embedding()?;
            return Ok((file.kernel, file.pretraining));
        }
        let classical = |kernel| KernelDescriptor::Classical {
            kernel,
            unit_sphere: self.unit_sphere,
        };
        let descriptor = match self.kernel.unwrap_or(KernelKind::Gaussian) {
            KernelKind::Linear => classical(ClassicalKernel::linear(self.coef0)),
            KernelKind::Polynomial => classical(ClassicalKernel::polynomial(self.coef0, self.degree)),
            KernelKind::Exponential => classical(ClassicalKernel::exponential(self.sigma)),
            KernelKind::Gaussian => classical(ClassicalKernel::gaussian(self.gamma, dim)),
            KernelKind::Quantum => {
                let spec = self.quantum.spec();
                let params = match &self.params {
                    Some(p) => ParamVector(p.clone()),
                    None => ParamVector::zeros(spec.param_count()),
                };
                KernelDescriptor::Quantum {
                    engine: self.quantum.engine(params, seed)?,
                }
            }
        };
        descriptor.validate()?;
        Ok((descriptor, None))
    }
}

#[derive(Debug, Args)]
pub struct DataOpts {
    #[arg(long)]
    data: PathBuf,
    /// Label column name (default: `label` when present).
    #[arg(long)]
    label_column: Option<String>,
}

impl DataOpts {
    fn load(&self) -> Result<Dataset> {
        load_csv(&self.data, self.label_column.as_deref())
    }
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[command(flatten)]
    data: DataOpts,
    /// Rows of the cross-Gram matrix; columns come from --data.
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "kernel.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    quantum: QuantumOpts,
    /// Starting angles, comma separated (default: seeded uniform in [-pi, pi]).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    init_params: Option<Vec<f64>>,
    /// SVC box constraint of the inner problem.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 100)]
    spsa_iters: usize,
    #[arg(long)]
    a0: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    a_stab: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "embedding.json")]
    out: PathBuf,
    /// Loss trace CSV (default: the output path with extension `.trace.csv`).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Svc,
    Krr,
    Svr,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    kernel: KernelOpts,
    /// Box constraint for SVC and SVR.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Ridge coefficient for KRR.
    #[arg(long, default_value_t = 1e-3)]
    reg: f64,
    /// Tube half-width for SVR.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MlkrrArgs {
    #[command(flatten)]
    data: DataOpts,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-3)]
    reg: f64,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 30)]
    iters: usize,
    /// Take plain gradient steps without halving on loss increase.
    #[arg(long)]
    no_backtrack: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    #[arg(long, default_value = "transform.csv")]
    transform_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataOpts,
    #[arg(long, default_value = "predictions.csv")]
    out: PathBuf,
    /// Also write the metrics CSV here.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KpcaArgs {
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    kernel: KernelOpts,
    #[arg(long, default_value_t = 2)]
    components: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "projections.csv")]
    out: PathBuf,
    /// Save the fitted projection for later `predict`.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    kernel: KernelOpts,
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "clusters.csv")]
    out: PathBuf,
}

/// Derives an independent seed for one role (`"spsa"`, `"shots"`, ...) of a command.
pub fn sub_seed(seed: u64, role: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in role.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(super) fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(a, out),
        Command::Kernel(a) => kernel(a, out),
        Command::Align(a) => align(a, out),
        Command::Train(a) => train(a, out, err),
        Command::Mlkrr(a) => mlkrr(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Kpca(a) => kpca(a, out),
        Command::Cluster(a) => cluster(a, out),
    }
}

fn say(out: &mut dyn Write, line: String) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_text(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn write_matrix(path: &Path, prefix: &str, m: &DMatrix<f64>) -> Result<()> {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("{prefix}{j}")).collect();
    let rows = m.row_iter().map(|r| r.iter().copied().collect());
    write_text(path, &csv_text(&header, rows))
}

fn prepared(ds: &Dataset, descriptor: &KernelDescriptor) -> Result<Vec<Vec<f64>>> {
    if descriptor.unit_sphere() {
        Ok(normalize_unit_sphere(ds)?.features)
    } else {
        Ok(ds.features.clone())
    }
}

fn gen_data(a: GenDataArgs, out: &mut dyn Write) -> Result<()> {
    let params = SyntheticParams {
        separation: a.separation,
        noise: a.noise,
        theta_star: a.theta_star,
    };
    let ds = gen_synthetic(a.kind, a.m, a.seed, &params)?;
    write_csv(&ds, &a.out)?;
    say(out, format!("wrote {} rows to {}", ds.len(), a.out.display()))
}

fn kernel(a: KernelArgs, out: &mut dyn Write) -> Result<()> {
    let train = a.data.load()?;
    let (descriptor, _) = a.kernel.resolve(train.dim(), a.seed)?;
    let x = prepared(&train, &descriptor)?;
    let k = match &a.test {
        Some(path) => {
            let test = load_csv(path, a.data.label_column.as_deref())?;
            descriptor.cross_gram(&prepared(&test, &descriptor)?, &x)?
        }
        None => descriptor.gram(&x)?.into_values(),
    };
    write_matrix(&a.out, "k", &k)?;
    say(
        out,
        format!("wrote {}x{} kernel matrix to {}", k.nrows(), k.ncols(), a.out.display()),
    )
}

fn align(a: AlignArgs, out: &mut dyn Write) -> Result<()> {
    let ds = a.data.load()?;
    let y = ds.require_labels()?;
    let spec = a.quantum.spec();
    spec.validate()?;
    let init = match &a.init_params {
        Some(p) => ParamVector(p.clone()),
        None => spec.random_params(sub_seed(a.seed, "init")),
    };
    let base = a.quantum.engine(init.clone(), a.seed)?;
    let defaults = SpsaConfig::default();
    let spsa = SpsaConfig {
        a0: a.a0.unwrap_or(defaults.a0),
        c0: a.c0.unwrap_or(defaults.c0),
        a_stab: a.a_stab.unwrap_or(defaults.a_stab),
        max_iter: a.spsa_iters,
        seed: sub_seed(a.seed, "spsa"),
        ..defaults
    };
    let state = qka_align(&base, &ds.features, y, a.c, &spsa, &init)?;
    let artifact = export_embedding(&state, &base, TaskKind::Classification, a.seed)?;
    save_model(&ModelFile::from_embedding(&artifact, init)?, &a.out)?;

    let trace_path = a.trace.clone().unwrap_or_else(|| a.out.with_extension("trace.csv"));
    let header = ["iteration", "loss_eval", "loss_best"].map(String::from);
    let mut text = header.join(",");
    text.push('\n');
    for t in &state.trace {
        text.push_str(&format!("{},{},{}\n", t.iteration, t.loss_eval, t.loss_best));
    }
    write_text(&trace_path, &text)?;
    say(
        out,
        format!(
            "loss_init={} loss_best={} params_best={:?}",
            state.loss_init, state.loss_best, state.params_best.0
        ),
    )?;
    say(out, format!("wrote {} and {}", a.out.display(), trace_path.display()))
}

fn train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let ds = a.data.load()?;
    let y = ds.require_labels()?;
    let (descriptor, pretraining) = a.kernel.resolve(ds.dim(), a.seed)?;
    let downstream = match a.method {
        Method::Svc => TaskKind::Classification,
        Method::Krr | Method::Svr => TaskKind::Regression,
    };
    if let Some(p) = &pretraining {
        if !p.task.matches(downstream) {
            writeln!(
                err,
                "warning: embedding was pretrained for {:?} but is used for {:?}",
                p.task, downstream
            )
            .map_err(|e| Error::io("<stderr>", e))?;
        }
    }
    let x = prepared(&ds, &descriptor)?;
    let k = descriptor.gram(&x)?;
    let (file, summary) = match a.method {
        Method::Svc => {
            let model = svc_fit(&k, y, a.c)?;
            let summary = format!("svc: {} support vectors", model.support_count());
            let payload = SvcPayload {
                model,
                train_features: x,
            };
            (
                ModelFile::new(ModelKind::Svc, descriptor, &payload, pretraining, a.seed)?,
                summary,
            )
        }
        Method::Krr => {
            let model = krr_fit(&k, y, a.reg)?;
            let payload = KrrPayload {
                model,
                train_features: x,
            };
            (
                ModelFile::new(ModelKind::Krr, descriptor, &payload, pretraining, a.seed)?,
                "krr".to_string(),
            )
        }
        Method::Svr => {
            let model = svr_fit(&k, y, a.c, a.epsilon)?;
            let summary = format!("svr: {} iterations, converged={}", model.iterations, model.converged);
            let payload = SvrPayload {
                model,
                train_features: x,
            };
            (
                ModelFile::new(ModelKind::Svr, descriptor, &payload, pretraining, a.seed)?,
                summary,
            )
        }
    };
    save_model(&file, &a.out)?;
    say(out, format!("{summary}; wrote {}", a.out.display()))
}

fn mlkrr(a: MlkrrArgs, out: &mut dyn Write) -> Result<()> {
    let ds = a.data.load()?;
    let y = ds.require_labels()?;
    let cfg = MlkrrConfig {
        lr: a.lr,
        outer_iters: a.iters,
        backtrack: !a.no_backtrack,
        seed: a.seed,
        ..MlkrrConfig::new(a.gamma, a.reg)
    };
    let r = mlkrr_fit(&ds.features, y, &cfg)?;
    let descriptor = KernelDescriptor::Classical {
        kernel: ClassicalKernel::gaussian_metric(a.gamma, r.transform.clone()),
        unit_sphere: false,
    };
    let payload = KrrPayload {
        model: r.model,
        train_features: ds.features.clone(),
    };
    save_model(
        &ModelFile::new(ModelKind::Krr, descriptor, &payload, None, a.seed)?,
        &a.out,
    )?;
    write_matrix(&a.transform_out, "a", &r.transform)?;
    say(
        out,
        format!(
            "loss_init={} loss_final={}; wrote {} and {}",
            r.loss_trace[0],
            r.loss_trace[r.loss_trace.len() - 1],
            a.out.display(),
            a.transform_out.display()
        ),
    )
}

fn predict(a: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let file = load_model(&a.model)?;
    let ds = a.data.load()?;
    let x = prepared(&ds, &file.kernel)?;
    let (header, rows, metrics) = match file.kind {
        ModelKind::Svc => {
            let p: SvcPayload = file.payload()?;
            let pred = p.model.predict(&file.kernel.cross_gram(&x, &p.train_features)?)?;
            let metrics = ds.labels.as_ref().map(|y| classification_metrics(&pred, y));
            (vec!["prediction".to_string()], pred, metrics)
        }
        ModelKind::Krr | ModelKind::Svr => {
            let pred = if file.kind == ModelKind::Krr {
                let p: KrrPayload = file.payload()?;
                p.model.predict(&file.kernel.cross_gram(&x, &p.train_features)?)?
            } else {
                let p: SvrPayload = file.payload()?;
                p.model.predict(&file.kernel.cross_gram(&x, &p.train_features)?)?
            };
            let metrics = ds.labels.as_ref().map(|y| regression_metrics(&pred, y));
            (vec!["prediction".to_string()], pred, metrics)
        }
        ModelKind::Kpca => {
            let p: KpcaPayload = file.payload()?;
            let proj = p.model.transform(&file.kernel.cross_gram(&x, &p.train_features)?)?;
            write_matrix(&a.out, "pc", &proj)?;
            return say(
                out,
                format!(
                    "wrote {}x{} projections to {}",
                    proj.nrows(),
                    proj.ncols(),
                    a.out.display()
                ),
            );
        }
        ModelKind::Embedding => {
            return Err(Error::Argument(
                "an embedding has no predictor; train a model with --embedding first".into(),
            ))
        }
    };
    if let Some(y) = &ds.labels {
        if y.len() != rows.len() {
            return Err(Error::Dimension("labels and predictions differ in length".into()));
        }
    }
    write_text(&a.out, &csv_text(&header, rows.iter().map(|v| vec![*v])))?;
    if let Some((names, values)) = metrics {
        let text = csv_text(&names, std::iter::once(values));
        if let Some(path) = &a.metrics_out {
            write_text(path, &text)?;
        }
        write!(out, "{text}").map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

fn classification_metrics(pred: &[f64], y: &[f64]) -> (Vec<String>, Vec<f64>) {
    let hits = pred.iter().zip(y).filter(|(p, t)| p == t).count();
    (vec!["accuracy".into()], vec![hits as f64 / y.len() as f64])
}

fn regression_metrics(pred: &[f64], y: &[f64]) -> (Vec<String>, Vec<f64>) {
    let n = y.len() as f64;
    let mse = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let mae = pred.iter().zip(y).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    (vec!["rmse".into(), "mae".into()], vec![mse.sqrt(), mae])
}

fn kpca(a: KpcaArgs, out: &mut dyn Write) -> Result<()> {
    let ds = a.data.load()?;
    let (descriptor, pretraining) = a.kernel.resolve(ds.dim(), a.seed)?;
    let x = prepared(&ds, &descriptor)?;
    let k = descriptor.gram(&x)?;
    let model = kpca_fit(&k, a.components)?;
    let proj = model.transform(k.values())?;
    write_matrix(&a.out, "pc", &proj)?;
    if let Some(path) = &a.model_out {
        let payload = KpcaPayload {
            model,
            train_features: x,
        };
        save_model(
            &ModelFile::new(ModelKind::Kpca, descriptor, &payload, pretraining, a.seed)?,
            path,
        )?;
    }
    say(
        out,
        format!(
            "wrote {}x{} projections to {}",
            proj.nrows(),
            proj.ncols(),
            a.out.display()
        ),
    )
}

fn cluster(a: ClusterArgs, out: &mut dyn Write) -> Result<()> {
    let ds = a.data.load()?;
    let (descriptor, _) = a.kernel.resolve(ds.dim(), a.seed)?;
    let x = prepared(&ds, &descriptor)?;
    let r = kernel_kmeans(
        &descriptor.gram(&x)?,
        a.clusters,
        sub_seed(a.seed, "kmeans"),
        a.max_iter,
    )?;
    let mut text = String::from("cluster\n");
    for c in &r.assignments {
        text.push_str(&format!("{c}\n"));
    }
    write_text(&a.out, &text)?;
    say(
        out,
        format!(
            "objective={} iterations={} converged={}; wrote {}",
            r.objective(),
            r.iterations,
            r.converged,
            a.out.display()
        ),
    )
}
