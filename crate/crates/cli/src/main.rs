use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use spatialgrammar::datagen::{
    extract_pretrain_corpus, generate_dpo_pairs_n, generate_sft_dataset, sft_pairs, write_jsonl, Execution, Record,
    SceneTemplate,
};
use spatialgrammar::{
    check_closure, compile_building, compile_scene, evaluate_cumulative, export_scene, import_json, parse_llmslb,
    parse_llmsli, program_stats, validate, BuildingProgram, Checklist, CompileOptions, CompiledScene, Envelope,
    ExportFormat, ParseError, ValidateOptions, Vocabulary,
};

mod config;

use config::CliConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    /// Already rendered with the offending line.
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Failed(String),
}

/// Scene toolchain: compile, validate, export and generate training data.
#[derive(Debug, Parser)]
#[command(name = "sgc", version)]
struct Cli {
    /// Vocabulary file; the built-in table when absent.
    #[arg(long, global = true, env = "SG_VOCAB")]
    vocab: Option<PathBuf>,
    /// TOML file with defaults for vocab, eps, tol, out_dir, seed and
    /// ceiling_height.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Json,
    Obj,
    Svg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Stage {
    Sft,
    Pretrain,
    Dpo,
    All,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile a layout or building program and export it.
    Compile {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        out: OutFormat,
        /// Building the layout is placed in.
        #[arg(long)]
        building: Option<PathBuf>,
        /// Write here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        ceiling_height: Option<f64>,
    },
    /// Check collisions, support and bounds; exit 1 on any violation.
    Validate {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportFormat,
        #[arg(long)]
        building: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Report open wall structures of a building; exit 1 if any.
    CheckBuilding { file: PathBuf },
    /// Generate JSONL training data from a scene template.
    GenData {
        /// Built-in name (living_room, bedroom, office) or a TOML path.
        #[arg(long)]
        template: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "all")]
        stage: Stage,
        /// Directory for sft.jsonl, pretrain.jsonl and dpo.jsonl; a single
        /// stage goes to stdout when absent.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Number of preference pairs; one per sample by default.
        #[arg(long)]
        pairs: Option<usize>,
        /// Run on one thread. Output is identical either way.
        #[arg(long)]
        serial: bool,
    },
    /// Score scenes against checklists. One scene and one checklist give a
    /// single ratio; several are scored turn by turn.
    Eval {
        /// Scene JSON or program, once per turn.
        #[arg(long, required = true)]
        scene: Vec<PathBuf>,
        /// Checklist JSON (one object or an array of turns).
        #[arg(long, required = true)]
        checklist: Vec<PathBuf>,
    },
    /// Size and depth statistics of a program.
    Stats { file: PathBuf },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn render_parse_error(path: &Path, src: &str, e: &ParseError) -> CliError {
    let mut msg = format!("{}:{e}", path.display());
    if let Some(line) = src.lines().nth(e.line().saturating_sub(1)) {
        let pad = " ".repeat(e.col().saturating_sub(1).min(line.len()));
        msg.push_str(&format!("\n    {line}\n    {pad}^"));
    }
    CliError::Parse(msg)
}

fn is_building(src: &str) -> bool {
    src.split_whitespace().next() == Some("llmslb")
}

fn load_building(path: &Path) -> Result<BuildingProgram, CliError> {
    let src = read(path)?;
    parse_llmslb(&src).map_err(|e| render_parse_error(path, &src, &e))
}

struct Ctx {
    vocab: Vocabulary,
    config: CliConfig,
}

impl Ctx {
    fn compile_opts(&self, flag: Option<f64>) -> CompileOptions {
        CompileOptions {
            ceiling_height: flag.or(self.config.ceiling_height),
        }
    }

    fn compile_building(&self, b: &BuildingProgram, opts: &CompileOptions) -> Result<CompiledScene, CliError> {
        compile_building(b, &self.vocab, opts).map_err(|e| CliError::Failed(e.to_string()))
    }

    /// Compiles `path` (a layout or a building), optionally placing a layout
    /// in `building`. Also returns the envelope objects must stay in.
    fn compile(
        &self,
        path: &Path,
        building: Option<&Path>,
        opts: &CompileOptions,
    ) -> Result<(CompiledScene, Option<Envelope>), CliError> {
        let src = read(path)?;
        if is_building(&src) {
            let b = parse_llmslb(&src).map_err(|e| render_parse_error(path, &src, &e))?;
            let s = self.compile_building(&b, opts)?;
            return Ok((s, Some(Envelope::building(&b))));
        }
        let p = parse_llmsli(&src).map_err(|e| render_parse_error(path, &src, &e))?;
        let scene = compile_scene(&p, &self.vocab, opts).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
        match building {
            None => Ok((scene, None)),
            Some(bp) => {
                let b = load_building(bp)?;
                let shell = self.compile_building(&b, opts)?;
                Ok((scene.with_building(&shell), Some(Envelope::building(&b))))
            }
        }
    }

    fn scene_for_eval(&self, path: &Path) -> Result<CompiledScene, CliError> {
        let src = read(path)?;
        if src.trim_start().starts_with('{') {
            import_json(&src).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
        } else {
            Ok(self.compile(path, None, &self.compile_opts(None))?.0)
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => io::stdout().write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes") + "\n"
}

fn write_stage<T: Record>(dir: Option<&Path>, file: &str, records: &[T]) -> Result<(), CliError> {
    let io_err = |path: PathBuf| move |source| CliError::Io { path, source };
    match dir {
        Some(d) => {
            let path = d.join(file);
            let f = fs::File::create(&path).map_err(io_err(path.clone()))?;
            let mut w = io::BufWriter::new(f);
            write_jsonl(&mut w, records).map_err(|e| CliError::Failed(e.to_string()))?;
            w.flush().map_err(io_err(path))
        }
        None => write_jsonl(io::stdout().lock(), records).map_err(|e| CliError::Failed(e.to_string())),
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let config = match &cli.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    let vocab = match cli.vocab.as_ref().or(config.vocab.as_ref()) {
        Some(p) => Vocabulary::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => Vocabulary::builtin(),
    };
    let ctx = Ctx { vocab, config };
    match cli.command {
        Command::Compile {
            file,
            out,
            building,
            output,
            ceiling_height,
        } => {
            let (scene, _) = ctx.compile(&file, building.as_deref(), &ctx.compile_opts(ceiling_height))?;
            for w in &scene.warnings {
                eprintln!("warning: {w}");
            }
            let format = match out {
                OutFormat::Json => ExportFormat::Json,
                OutFormat::Obj => ExportFormat::Obj,
                OutFormat::Svg => ExportFormat::Svg,
            };
            emit(output.as_deref(), &export_scene(&scene, format))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            file,
            report,
            building,
            eps,
            tol,
        } => {
            let (scene, envelope) = ctx.compile(&file, building.as_deref(), &ctx.compile_opts(None))?;
            let defaults = ValidateOptions::default();
            let opts = ValidateOptions {
                eps: eps.or(ctx.config.eps).unwrap_or(defaults.eps),
                tol: tol.or(ctx.config.tol).unwrap_or(defaults.tol),
            };
            let r = validate(&scene, envelope.as_ref(), &opts);
            let text = match report {
                ReportFormat::Json => to_json(&r),
                ReportFormat::Text => r.to_text(),
            };
            emit(None, &text)?;
            Ok(if r.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::CheckBuilding { file } => {
            let b = load_building(&file)?;
            let shell = ctx.compile_building(&b, &ctx.compile_opts(None))?;
            for w in &shell.warnings {
                eprintln!("warning: {w}");
            }
            let open = check_closure(&b);
            let mut out = String::new();
            for d in &open {
                out.push_str(&d.message);
                out.push('\n');
            }
            let structures = b.wall_components().len();
            if open.is_empty() {
                out.push_str(&format!("closed ({structures} wall structures)\n"));
            } else {
                out.push_str(&format!("{} of {structures} wall structures are open\n", open.len()));
            }
            emit(None, &out)?;
            Ok(if open.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::GenData {
            template,
            n,
            seed,
            stage,
            out_dir,
            pairs,
            serial,
        } => {
            let t = SceneTemplate::resolve(&template).map_err(|e| CliError::Usage(e.to_string()))?;
            let seed = seed.or(ctx.config.seed).unwrap_or(0);
            let out_dir = out_dir.or(ctx.config.out_dir.clone());
            if stage == Stage::All && out_dir.is_none() {
                return Err(CliError::Usage("--stage all needs --out-dir".into()));
            }
            if let Some(d) = &out_dir {
                fs::create_dir_all(d).map_err(|source| CliError::Io {
                    path: d.clone(),
                    source,
                })?;
            }
            let exec = if serial { Execution::Serial } else { Execution::Parallel };
            let d = generate_sft_dataset(&t, &ctx.vocab, n, seed, exec).map_err(|e| CliError::Failed(e.to_string()))?;
            let dir = out_dir.as_deref();
            if matches!(stage, Stage::Sft | Stage::All) {
                write_stage(dir, "sft.jsonl", &sft_pairs(&d))?;
            }
            if matches!(stage, Stage::Pretrain | Stage::All) {
                write_stage(dir, "pretrain.jsonl", &extract_pretrain_corpus(&d))?;
            }
            let mut summary = format!("{} samples", d.len());
            if matches!(stage, Stage::Dpo | Stage::All) {
                let batch = generate_dpo_pairs_n(&d, &t.incompatible, &ctx.vocab, pairs.unwrap_or(n), seed, exec);
                write_stage(dir, "dpo.jsonl", &batch.pairs)?;
                summary.push_str(&format!(", {} pairs ({} chains failed)", batch.pairs.len(), batch.failed));
            }
            eprintln!("{}: {summary}", t.name);
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { scene, checklist } => {
            let scenes = scene
                .iter()
                .map(|p| ctx.scene_for_eval(p))
                .collect::<Result<Vec<_>, _>>()?;
            let mut lists: Vec<Checklist> = Vec::new();
            for p in &checklist {
                let v: serde_json::Value =
                    serde_json::from_str(&read(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                let parsed = if v.is_array() {
                    serde_json::from_value::<Vec<Checklist>>(v)
                } else {
                    serde_json::from_value::<Checklist>(v).map(|c| vec![c])
                };
                lists.extend(parsed.map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?);
            }
            let results = evaluate_cumulative(&scenes, &lists).map_err(|e| CliError::Usage(e.to_string()))?;
            emit(None, &to_json(&results))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { file } => {
            let src = read(&file)?;
            let text = if is_building(&src) {
                let b = parse_llmslb(&src).map_err(|e| render_parse_error(&file, &src, &e))?;
                let g = b.grid();
                let count = |s| b.count(s);
                to_json(&serde_json::json!({
                    "rows": g.rows,
                    "cols": g.cols,
                    "walls": count(spatialgrammar::StructSymbol::Wall),
                    "doors": count(spatialgrammar::StructSymbol::Door),
                    "windows": count(spatialgrammar::StructSymbol::Window),
                    "wall_structures": b.wall_components().len(),
                    "open_structures": check_closure(&b).len(),
                }))
            } else {
                let p = parse_llmsli(&src).map_err(|e| render_parse_error(&file, &src, &e))?;
                to_json(&program_stats(&p))
            };
            emit(None, &text)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
