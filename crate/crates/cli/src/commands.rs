use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;
use syntagraph::decoupling::{decoupling_experiment, RelationEmbeddingMatrix};
use syntagraph::encoder::{
    embed_nodes, encode, init_params, load_checkpoint, save_checkpoint, Checkpoint, EncoderConfig,
};
use syntagraph::gradcheck::{run_grad_check, GradCheckConfig, TensorCheck};
use syntagraph::graph::{build_graph, flatten_input, GraphDocument, RelationLabel};
use syntagraph::question::{load_conllu, QuestionToken};
use syntagraph::schema::load_schema;
use syntagraph::{Error, RunManifest};

use crate::output::{csv_bytes, json_bytes, sibling, similarity_csv, write_bytes, ReportSummary};
use crate::settings::Settings;
use crate::{
    BuildGraphArgs, Cli, Command, DcTrainArgs, EncodeArgs, GradCheckArgs, InitParamsArgs,
    SimMatrixArgs, Status,
};

pub const OUTPUT_FORMAT_VERSION: u32 = 1;

pub fn run(cli: &Cli) -> Result<Status> {
    let settings = Settings::load(cli.config.as_deref())?;
    let mut manifest = RunManifest::new(command_name(&cli.command));
    if let Some(config) = &cli.config {
        manifest = manifest.input("config", path_str(config));
    }
    match &cli.command {
        Command::BuildGraph(a) => build_graph_cmd(a, out_path(cli)?, manifest).map(|_| Status::Ok),
        Command::InitParams(a) => {
            init_params_cmd(a, cli, &settings, out_path(cli)?, manifest).map(|_| Status::Ok)
        }
        Command::Encode(a) => encode_cmd(a, out_path(cli)?, manifest).map(|_| Status::Ok),
        Command::GradCheck(a) => grad_check_cmd(a, cli, &settings, manifest),
        Command::DcTrain(a) => {
            dc_train_cmd(a, cli, &settings, out_path(cli)?, manifest).map(|_| Status::Ok)
        }
        Command::SimMatrix(a) => sim_matrix_cmd(a, out_path(cli)?, manifest).map(|_| Status::Ok),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::BuildGraph(_) => "build-graph",
        Command::InitParams(_) => "init-params",
        Command::Encode(_) => "encode",
        Command::GradCheck(_) => "grad-check",
        Command::DcTrain(_) => "dc-train",
        Command::SimMatrix(_) => "sim-matrix",
    }
}

fn out_path(cli: &Cli) -> Result<&Path> {
    match &cli.out {
        Some(p) => Ok(p),
        None => bail!(Error::Validation("--out is required for this command".into())),
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) {
    print!("{}", String::from_utf8(json_bytes(value)).expect("json is utf-8"));
}

/// The question text and the parse tokens must spell the same characters once
/// whitespace is removed.
fn check_question(text: &str, tokens: &[QuestionToken]) -> Result<()> {
    let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
    let question = strip(text);
    let joined: String = tokens.iter().map(|t| strip(&t.surface)).collect();
    if question != joined {
        bail!(Error::Validation(format!(
            "question text '{}' does not match the parse tokens '{}'",
            text.trim(),
            tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ")
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct GraphSummary {
    out: String,
    num_nodes: usize,
    num_questions: usize,
    num_tables: usize,
    num_columns: usize,
}

fn build_graph_cmd(a: &BuildGraphArgs, out: &Path, manifest: RunManifest) -> Result<()> {
    let manifest = manifest
        .input("schema", path_str(&a.schema))
        .input("parse", path_str(&a.parse))
        .input("question", path_str(&a.question));
    let schema = load_schema(&read(&a.schema)?)?;
    let parse_text = String::from_utf8(read(&a.parse)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", a.parse.display())))?;
    let (tokens, parse) = load_conllu(&parse_text)?;
    let question = String::from_utf8(read(&a.question)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", a.question.display())))?;
    check_question(&question, &tokens)?;

    let graph = build_graph(&tokens, &parse, &schema)?;
    let sequence = flatten_input(&tokens, &schema)?;
    info!(
        "graph over {} tokens, {} tables, {} columns",
        graph.num_questions(),
        graph.num_tables(),
        graph.num_columns()
    );
    let summary = GraphSummary {
        out: path_str(out),
        num_nodes: graph.num_nodes(),
        num_questions: graph.num_questions(),
        num_tables: graph.num_tables(),
        num_columns: graph.num_columns(),
    };
    let doc = GraphDocument {
        manifest: Some(manifest),
        graph,
        sequence: Some(sequence),
    };
    write_bytes(out, &doc.to_bytes())?;
    print_json(&summary);
    Ok(())
}

fn init_params_cmd(
    a: &InitParamsArgs,
    cli: &Cli,
    settings: &Settings,
    out: &Path,
    mut manifest: RunManifest,
) -> Result<()> {
    let d = EncoderConfig::default();
    let config = EncoderConfig {
        num_layers: settings.resolve(&mut manifest, "num_layers", a.layers, d.num_layers)?,
        num_heads: settings.resolve(&mut manifest, "num_heads", a.heads, d.num_heads)?,
        model_dim: settings.resolve(&mut manifest, "model_dim", a.dim, d.model_dim)?,
        ffn_dim: settings.resolve(&mut manifest, "ffn_dim", a.ffn, d.ffn_dim)?,
        dropout_rate: settings.resolve(&mut manifest, "dropout_rate", a.dropout, d.dropout_rate)?,
        seed: settings.resolve(&mut manifest, "seed", cli.seed, d.seed)?,
    };
    config.validate()?;
    manifest.seed = Some(config.seed);
    let (params, tables) = init_params(&config);
    let ckpt = Checkpoint {
        manifest: Some(manifest),
        config,
        params,
        tables,
    };
    write_bytes(out, &save_checkpoint(&ckpt))
}

#[derive(Serialize)]
struct EncodeDocument<'a> {
    format_version: u32,
    manifest: &'a RunManifest,
    config: &'a EncoderConfig,
    num_nodes: usize,
    model_dim: usize,
    input: Vec<Vec<f64>>,
    output: Vec<Vec<f64>>,
}

fn rows(m: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn encode_cmd(a: &EncodeArgs, out: &Path, manifest: RunManifest) -> Result<()> {
    let mut manifest = manifest
        .input("graph", path_str(&a.graph))
        .input("params", path_str(&a.params));
    let doc = GraphDocument::from_bytes(&read(&a.graph)?)?;
    let ckpt = load_checkpoint(&read(&a.params)?)?;
    let sequence = doc.sequence.as_ref().ok_or_else(|| {
        Error::Validation("graph document carries no input sequence to embed".into())
    })?;
    manifest.seed = Some(ckpt.config.seed);
    let x = embed_nodes(sequence, &ckpt.config);
    let z = encode(&doc.graph, &x, &ckpt.params, &ckpt.tables, &ckpt.config)?;
    let body = EncodeDocument {
        format_version: OUTPUT_FORMAT_VERSION,
        manifest: &manifest,
        config: &ckpt.config,
        num_nodes: z.nrows(),
        model_dim: z.ncols(),
        input: rows(&x),
        output: rows(&z),
    };
    write_bytes(out, &json_bytes(&body))
}

fn parse_dims(s: &str) -> Result<[usize; 4]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::Validation(format!("--dims '{s}' must be model_dim,heads,layers,nodes"));
    if parts.len() != 4 {
        bail!(bad());
    }
    let mut out = [0; 4];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| bad())?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct GradCheckDocument<'a> {
    format_version: u32,
    manifest: &'a RunManifest,
    max_rel_error: f64,
    threshold: f64,
    passed: bool,
    tensors: Vec<TensorRow<'a>>,
}

#[derive(Serialize)]
struct TensorRow<'a> {
    name: &'a str,
    coords: usize,
    max_rel_error: f64,
}

impl<'a> From<&'a TensorCheck> for TensorRow<'a> {
    fn from(t: &'a TensorCheck) -> Self {
        TensorRow {
            name: &t.name,
            coords: t.coords,
            max_rel_error: t.max_rel_error,
        }
    }
}

fn grad_check_cmd(
    a: &GradCheckArgs,
    cli: &Cli,
    settings: &Settings,
    mut manifest: RunManifest,
) -> Result<Status> {
    let d = GradCheckConfig::default();
    let default_dims = format!("{},{},{},{}", d.model_dim, d.num_heads, d.num_layers, d.num_nodes);
    let dims = settings.resolve(&mut manifest, "dims", a.dims.clone(), default_dims)?;
    let [model_dim, num_heads, num_layers, num_nodes] = parse_dims(&dims)?;
    if num_nodes == 0 {
        bail!(Error::Validation("--dims needs at least one node".into()));
    }
    let cfg = GradCheckConfig {
        model_dim,
        num_heads,
        num_layers,
        num_nodes,
        ffn_dim: settings.resolve(&mut manifest, "ffn_dim", a.ffn, 2 * model_dim)?,
        lambda_dc: settings.resolve(&mut manifest, "lambda", a.lambda, d.lambda_dc)?,
        coords_per_tensor: settings.resolve(&mut manifest, "coords", a.coords, d.coords_per_tensor)?,
        step: settings.resolve(&mut manifest, "step", a.step, d.step)?,
        seed: settings.resolve(&mut manifest, "seed", cli.seed, d.seed)?,
    };
    let threshold = settings.resolve(&mut manifest, "threshold", a.threshold, 1e-4)?;
    if !(cfg.step > 0.0) || !(cfg.lambda_dc >= 0.0) {
        bail!(Error::Validation("step must be positive and lambda non-negative".into()));
    }
    if a.corrupt_gradient {
        manifest.overrides.insert("corrupt_gradient".into(), "true".into());
    }
    manifest.seed = Some(cfg.seed);
    let report = run_grad_check(&cfg, a.corrupt_gradient)?;
    let passed = report.max_rel_error < threshold;
    for t in &report.tensors {
        info!("{:<24} {:>3} coords  max rel err {:.3e}", t.name, t.coords, t.max_rel_error);
    }
    let doc = GradCheckDocument {
        format_version: OUTPUT_FORMAT_VERSION,
        manifest: &manifest,
        max_rel_error: report.max_rel_error,
        threshold,
        passed,
        tensors: report.tensors.iter().map(TensorRow::from).collect(),
    };
    if let Some(out) = &cli.out {
        write_bytes(out, &json_bytes(&doc))?;
    }
    print_json(&doc);
    if passed {
        Ok(Status::Ok)
    } else {
        eprintln!(
            "gradient check failed: max relative error {:.3e} >= {threshold:.1e}",
            report.max_rel_error
        );
        Ok(Status::ThresholdExceeded)
    }
}

#[derive(Serialize)]
struct DcTrainSummary<'a> {
    format_version: u32,
    manifest: &'a RunManifest,
    trajectory: String,
    with_dc_matrix: String,
    without_dc_matrix: String,
    initial_loss: f64,
    final_loss: f64,
    with_dc: ReportSummary,
    without_dc: ReportSummary,
}

fn dc_train_cmd(
    a: &DcTrainArgs,
    cli: &Cli,
    settings: &Settings,
    out: &Path,
    mut manifest: RunManifest,
) -> Result<()> {
    let k = settings.resolve(&mut manifest, "k", a.k, 32)?;
    let d = settings.resolve(&mut manifest, "d", a.d, 64)?;
    let steps = settings.resolve(&mut manifest, "steps", a.steps, 2000)?;
    let lr = settings.resolve(&mut manifest, "lr", a.lr, 0.1)?;
    let lambda = settings.resolve(&mut manifest, "lambda", a.lambda, 1.0)?;
    let seed = settings.resolve(&mut manifest, "seed", cli.seed, 0)?;
    manifest.seed = Some(seed);
    let outcome = decoupling_experiment(k, d, steps, lr, lambda, seed)?;

    let header = vec!["step".to_string(), "dc_loss".to_string()];
    let traj: Vec<Vec<String>> = outcome
        .trajectory
        .iter()
        .enumerate()
        .map(|(s, l)| vec![s.to_string(), l.to_string()])
        .collect();
    write_bytes(out, &csv_bytes(&manifest, &header, &traj)?)?;

    let labels: Vec<String> = (0..k).map(|j| format!("r{j}")).collect();
    let with_path: PathBuf = sibling(out, "with_dc");
    let without_path: PathBuf = sibling(out, "without_dc");
    write_bytes(&with_path, &similarity_csv(&manifest, &labels, &outcome.with_dc)?)?;
    write_bytes(&without_path, &similarity_csv(&manifest, &labels, &outcome.without_dc)?)?;

    print_json(&DcTrainSummary {
        format_version: OUTPUT_FORMAT_VERSION,
        manifest: &manifest,
        trajectory: path_str(out),
        with_dc_matrix: path_str(&with_path),
        without_dc_matrix: path_str(&without_path),
        initial_loss: outcome.trajectory[0],
        final_loss: outcome.trajectory[steps],
        with_dc: (&outcome.with_dc).into(),
        without_dc: (&outcome.without_dc).into(),
    });
    Ok(())
}

#[derive(Serialize)]
struct SimSummary<'a> {
    format_version: u32,
    manifest: &'a RunManifest,
    matrix: String,
    num_relations: usize,
    #[serde(flatten)]
    report: ReportSummary,
}

fn sim_matrix_cmd(a: &SimMatrixArgs, out: &Path, manifest: RunManifest) -> Result<()> {
    let mut manifest = manifest.input("params", path_str(&a.params));
    let ckpt = load_checkpoint(&read(&a.params)?)?;
    manifest.seed = Some(ckpt.config.seed);
    let r = RelationEmbeddingMatrix::from_tables(&ckpt.tables)?;
    let report = r.similarity_matrix()?;
    let labels: Vec<String> = RelationLabel::ALL.iter().map(|l| l.name().to_string()).collect();
    write_bytes(out, &similarity_csv(&manifest, &labels, &report)?)?;
    print_json(&SimSummary {
        format_version: OUTPUT_FORMAT_VERSION,
        manifest: &manifest,
        matrix: path_str(out),
        num_relations: labels.len(),
        report: (&report).into(),
    });
    Ok(())
}
