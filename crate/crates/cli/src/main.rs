use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use sdrs_core::analysis::{analyze, build_view, corpus_summary, AnalysisError, AnalysisReport};
use sdrs_core::export::{export_tree, from_json, Format};
use sdrs_core::model::Mode;
use sdrs_core::stats::{table2, table3};
use sdrs_core::transcript::{load_sequence_records, parse_transcript, TranscriptDocument};
use sdrs_core::AttachError;

const TRANSCRIPT_EXT: &str = "dlg";

#[derive(Parser)]
#[command(name = "sdrs", version, about = "Discourse trees, frontier audits and corpus statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the discourse tree of each transcript and export it.
    Build {
        /// Transcript files or directories of `.dlg` files.
        paths: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Charity)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        /// Output directory; one file per transcript and view.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit 1 when any tree records a violation or a repair.
        #[arg(long)]
        strict_exit: bool,
    },
    /// Analyze transcripts in both views and report violations.
    Check {
        paths: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Dual)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert an exported graph (JSON) to another format.
    Render {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Dot)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Contingency tests over sequence records.
    Stats {
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = StatsFormat::Text)]
        format: StatsFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Strict,
    Charity,
    Repair,
    Dual,
}

impl ModeArg {
    fn modes(self) -> &'static [Mode] {
        match self {
            ModeArg::Strict => &[Mode::Strict],
            ModeArg::Charity => &[Mode::Charity],
            ModeArg::Repair => &[Mode::Repair],
            ModeArg::Dual => &[Mode::Charity, Mode::Repair],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dot,
    Json,
    Text,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Dot => Format::Dot,
            FormatArg::Json => Format::Json,
            FormatArg::Text => Format::Text,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsFormat {
    Text,
    Csv,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build { paths, mode, format, out, strict_exit } => {
            cmd_build(&paths, mode, format.into(), out.as_deref(), strict_exit)
        }
        Command::Check { paths, mode, format, out } => cmd_check(&paths, mode, format, out.as_deref()),
        Command::Render { input, format, out } => cmd_render(&input, format.into(), out.as_deref()),
        Command::Stats { csv, format, out } => cmd_stats(&csv, format, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("sdrs: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Expands directories to their `.dlg` files; the result is sorted by path.
fn collect_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let entries = fs::read_dir(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
            for entry in entries {
                let path = entry.map_err(|e| Failure::input(format!("{}: {e}", p.display())))?.path();
                if path.is_file() && path.extension().is_some_and(|x| x == TRANSCRIPT_EXT) {
                    files.push(path);
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<(PathBuf, TranscriptDocument)>, Failure> {
    let files = collect_inputs(paths)?;
    files
        .into_par_iter()
        .map(|path| {
            let bytes = fs::read(&path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let doc = parse_transcript(&bytes)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            Ok((path, doc))
        })
        .collect()
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure::input(format!("stdout: {e}")))
        }
    }
}

fn cmd_build(
    paths: &[PathBuf],
    mode: ModeArg,
    format: Format,
    out: Option<&Path>,
    strict_exit: bool,
) -> Result<u8, Failure> {
    let docs = load_all(paths)?;
    let built: Vec<_> = docs
        .par_iter()
        .map(|(path, doc)| {
            mode.modes()
                .iter()
                .map(|&m| build_view(doc, m).map(|g| (path, m, g)))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect();

    let mut trees = Vec::new();
    for result in built {
        match result {
            Ok(views) => trees.extend(views),
            Err(AnalysisError::Attach { dialogue, source, .. }) => {
                let act = match source.as_ref() {
                    AttachError::OffFrontier { act, .. }
                    | AttachError::UnknownSite { act, .. }
                    | AttachError::OutOfOrder { act, .. }
                    | AttachError::NotAnAscent { act, .. } => act.to_string(),
                    AttachError::DuplicateAct(act) => act.to_string(),
                };
                return Err(Failure {
                    code: 3,
                    message: format!("{dialogue}: rejected act {act}: {source}"),
                });
            }
        }
    }

    if let Some(dir) = out {
        if !trees.is_empty() {
            fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
        }
    }
    let mut stream = String::new();
    for (path, m, graph) in &trees {
        let rendered = export_tree(graph, format);
        match out {
            Some(dir) => {
                let stem = path.file_stem().map_or_else(|| "dialogue".into(), |s| s.to_string_lossy());
                let file = dir.join(format!("{stem}.{m}.{}", format.extension()));
                write_output(Some(&file), &rendered)?;
            }
            None => stream.push_str(&rendered),
        }
    }
    if out.is_none() {
        write_output(None, &stream)?;
    }

    let flagged = trees
        .iter()
        .any(|(_, _, g)| !g.violations().is_empty() || !g.repair_notes().is_empty());
    Ok(if strict_exit && flagged { 1 } else { 0 })
}

fn cmd_check(paths: &[PathBuf], mode: ModeArg, format: FormatArg, out: Option<&Path>) -> Result<u8, Failure> {
    if mode != ModeArg::Dual {
        return Err(Failure::input("check always runs both views; only --mode dual is accepted"));
    }
    let docs = load_all(paths)?;
    let reports: Vec<AnalysisReport> = docs
        .par_iter()
        .map(|(_, doc)| analyze(doc))
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::input(e.to_string()))?;
    let summary = corpus_summary(&reports);

    let text = match format {
        FormatArg::Text => {
            let mut s = String::new();
            for r in &reports {
                s.push_str(&r.to_text());
            }
            if !reports.is_empty() {
                let kinds: Vec<String> = summary.by_kind.iter().map(|(k, n)| format!("{k}={n}")).collect();
                let _ = writeln!(
                    s,
                    "corpus dialogues={} {} decisive={} non-decisive={}",
                    summary.dialogues,
                    kinds.join(" "),
                    summary.decisive,
                    summary.non_decisive
                );
            }
            s
        }
        FormatArg::Json => {
            let value = serde_json::json!({
                "reports": reports.iter().map(AnalysisReport::to_json_value).collect::<Vec<_>>(),
                "corpus": summary,
            });
            let mut s = serde_json::to_string_pretty(&value).expect("report serializes");
            s.push('\n');
            s
        }
        FormatArg::Dot => return Err(Failure::input("check writes text or json reports")),
    };
    write_output(out, &text)?;
    Ok(if reports.iter().any(AnalysisReport::has_violations) { 1 } else { 0 })
}

fn cmd_render(input: &Path, format: Format, out: Option<&Path>) -> Result<u8, Failure> {
    let bytes = fs::read(input).map_err(|e| Failure::input(format!("{}: {e}", input.display())))?;
    let graph = from_json(&bytes).map_err(|e| Failure::input(format!("{}: {e}", input.display())))?;
    write_output(out, &export_tree(&graph, format))?;
    Ok(0)
}

fn cmd_stats(csv: &Path, format: StatsFormat, out: Option<&Path>) -> Result<u8, Failure> {
    let bytes = fs::read(csv).map_err(|e| Failure::input(format!("{}: {e}", csv.display())))?;
    let records = load_sequence_records(&bytes).map_err(|e| Failure::input(format!("{}: {e}", csv.display())))?;
    let t2 = table2(&records).map_err(|e| Failure::input(e.to_string()))?;
    let t3 = table3(&records).map_err(|e| Failure::input(e.to_string()))?;
    for w in &t3.warnings {
        eprintln!("sdrs: warning: {w}");
    }
    let text = match format {
        StatsFormat::Text => format!("{}\n{}", t2.render_text(), t3.render_text()),
        StatsFormat::Csv => format!("{}\n{}", t2.render_csv(), t3.render_csv()),
    };
    write_output(out, &text)?;
    Ok(0)
}
