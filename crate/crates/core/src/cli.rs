//! Command-line front end.
//!
//! Exit codes: 0 ok, 1 usage or parse error, 2 validation violation,
//! 3 audit found mishandled state, 4 audit found timing-channel warnings only.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::audit::{self, Verdict};
use crate::classifier::{self, SensitivityReport};
use crate::footprint::{self, InstructionInsight};
use crate::isa_model::{BackendConfig, Isa, PrivilegeMode};
use crate::sail_syntax::{parse_corpus, SailModel};
use crate::state::{StateKind, StateRef};
use crate::trace_validator;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_MISHANDLED: i32 = 3;
pub const EXIT_TIMING: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "sailscan",
    version,
    about = "Footprint and context-switch sensitivity analysis for Sail ISA models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract instruction footprints and the state list.
    Scan(Common),
    /// Classify every state for a source/target mode pair.
    Classify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pair: Pair,
    },
    /// Check footprints against instruction traces.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Trace manifest (`trace_file, instruction_or_group, group_flag, mode_context`).
        #[arg(long)]
        traces: PathBuf,
    },
    /// Check a context-switch swap manifest against the sensitivity report.
    Audit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pair: Pair,
        /// Swap manifest (`register[.field], action[, provenance]`).
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct Common {
    /// Sail files or directories of Sail files.
    #[arg(long, num_args = 1.., required = true)]
    pub corpus: Vec<PathBuf>,
    /// Backend config file, or one of the built-in `riscv` and `riscv-h`.
    #[arg(long, default_value = "riscv")]
    pub backend: String,
    /// Output directory.
    #[arg(long, default_value = "sailscan-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Add the per-instruction dispatch path to every footprint.
    #[arg(long)]
    pub include_baseline: bool,
}

#[derive(Args, Debug)]
pub struct Pair {
    /// Privilege mode of the outgoing domain.
    #[arg(long)]
    pub source: Option<String>,
    /// Privilege mode of the incoming domain.
    #[arg(long)]
    pub target: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Scan(c) => scan(c),
        Command::Classify { common, pair } => classify(common, pair),
        Command::Validate { common, traces } => validate(common, traces),
        Command::Audit { common, pair, manifest } => run_audit(common, pair, manifest),
    }
}

fn load_backend(spec: &str) -> Result<BackendConfig> {
    Ok(match spec {
        "riscv" => BackendConfig::riscv(),
        "riscv-h" => BackendConfig::riscv_hypervisor(),
        path => BackendConfig::load(Path::new(path)).with_context(|| format!("loading backend config {path}"))?,
    })
}

fn load(common: &Common) -> Result<(SailModel, BackendConfig)> {
    let config = load_backend(&common.backend)?;
    let model = parse_corpus(&common.corpus)?;
    Ok((model, config))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut data = bytes.to_vec();
    if !data.ends_with(b"\n") {
        data.push(b'\n');
    }
    fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn insights_for(isa: &Isa<'_>, include_baseline: bool) -> Result<Vec<InstructionInsight>> {
    Ok(footprint::instruction_insights(
        isa.model,
        isa.config,
        include_baseline,
    )?)
}

fn scan(c: &Common) -> Result<i32> {
    let (model, config) = load(c)?;
    let isa = Isa::new(&model, &config);
    for d in &isa.diagnostics {
        log::warn!("{d}");
    }
    let insights = insights_for(&isa, c.include_baseline)?;
    match c.format {
        Format::Csv => {
            let mut buf = Vec::new();
            footprint::write_insights_csv(&insights, &mut buf)?;
            write_file(&c.out, "insights.csv", &buf)?;
            write_file(&c.out, "states.csv", &states_csv(&isa)?)?;
        }
        Format::Json => {
            write_file(&c.out, "insights.json", &serde_json::to_vec_pretty(&insights)?)?;
            write_file(&c.out, "states.json", &serde_json::to_vec_pretty(&isa.states)?)?;
        }
    }
    let csrs = isa
        .states
        .iter()
        .filter(|s| s.kind == StateKind::Csr && s.state.is_whole())
        .count();
    println!("instructions: {}", insights.len());
    println!("states: {} ({} CSRs)", isa.states.len(), csrs);
    Ok(EXIT_OK)
}

fn states_csv(isa: &Isa<'_>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "register".to_string(),
        "field".into(),
        "kind".into(),
        "width_bits".into(),
    ];
    header.extend(isa.modes().iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    for (s, a) in isa.states.iter().zip(isa.explicit_access_all()) {
        let mut row = vec![
            s.state.register.clone(),
            s.state.field.clone().unwrap_or_default(),
            s.kind.to_string(),
            s.width_bits.to_string(),
        ];
        for m in isa.modes() {
            let x = a.get(m);
            row.push(
                match (x.readable, x.writable) {
                    (true, true) => "rw",
                    (true, false) => "r",
                    (false, true) => "w",
                    (false, false) => "-",
                }
                .to_string(),
            );
        }
        w.write_record(&row)?;
    }
    Ok(w.into_inner()?)
}

fn modes(config: &BackendConfig, pair: &Pair) -> Result<(PrivilegeMode, PrivilegeMode)> {
    let get = |flag: &str, v: &Option<String>| -> Result<PrivilegeMode> {
        let Some(name) = v else { bail!("--{flag} is required") };
        config.mode(name).with_context(|| {
            let known: Vec<&str> = config.modes.iter().map(PrivilegeMode::name).collect();
            format!("unknown privilege mode `{name}` (known: {})", known.join(", "))
        })
    };
    Ok((get("source", &pair.source)?, get("target", &pair.target)?))
}

fn sensitivity(
    isa: &Isa<'_>,
    include_baseline: bool,
    src: &PrivilegeMode,
    dst: &PrivilegeMode,
) -> Result<SensitivityReport> {
    let (_, matrix) = classifier::analyze(isa, include_baseline)?;
    Ok(classifier::classify_all(src, dst, &matrix))
}

fn classify(c: &Common, pair: &Pair) -> Result<i32> {
    let (model, config) = load(c)?;
    let (src, dst) = modes(&config, pair)?;
    let isa = Isa::new(&model, &config);
    let report = sensitivity(&isa, c.include_baseline, &src, &dst)?;
    let mut buf = Vec::new();
    match c.format {
        Format::Csv => {
            classifier::write_sensitivity_csv(&report, &mut buf)?;
            write_file(&c.out, "sensitivity.csv", &buf)?;
        }
        Format::Json => {
            classifier::write_sensitivity_json(&report, &mut buf)?;
            write_file(&c.out, "sensitivity.json", &buf)?;
        }
    }
    let s = &report.summary;
    println!("sensitive states: {} of {}", s.sensitive_states, s.total_states);
    println!("sensitive non-GPR states: {}", s.non_gpr_sensitive);
    Ok(EXIT_OK)
}

fn validate(c: &Common, traces: &Path) -> Result<i32> {
    let (model, config) = load(c)?;
    let isa = Isa::new(&model, &config);
    let insights = insights_for(&isa, c.include_baseline)?;
    let bundles = trace_validator::load_traces(traces)?;
    let known: std::collections::BTreeSet<StateRef> = isa.states.iter().map(|s| s.state.clone()).collect();
    let by_key = trace_validator::footprints_by_key(&bundles, &known)?;
    let report = trace_validator::validate(&insights, &by_key);
    let mut json = Vec::new();
    trace_validator::write_validation_json(&report, &mut json)?;
    write_file(&c.out, "validation.json", &json)?;
    let mut text = Vec::new();
    trace_validator::write_validation_text(&report, &mut text)?;
    write_file(&c.out, "validation.txt", &text)?;
    print!("{}", String::from_utf8_lossy(&text));
    Ok(if report.has_violations() {
        EXIT_VALIDATION
    } else {
        EXIT_OK
    })
}

fn run_audit(c: &Common, pair: &Pair, manifest_path: &Path) -> Result<i32> {
    let (model, config) = load(c)?;
    let isa = Isa::new(&model, &config);
    let text = fs::read_to_string(manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
    let known = isa.states.iter().map(|s| s.state.clone()).collect();
    let manifest = audit::parse_manifest(&text, &config, &known)?;
    let (src, dst) = match (&manifest.pair, &pair.source, &pair.target) {
        (Some(p), None, None) => p.clone(),
        _ => modes(&config, pair)?,
    };
    let report = sensitivity(&isa, c.include_baseline, &src, &dst)?;
    let findings = audit::audit(&manifest, &report)?;
    let mut json = Vec::new();
    audit::write_audit_json(&findings, &mut json)?;
    write_file(&c.out, "audit.json", &json)?;
    let mut table = Vec::new();
    audit::write_audit_text(&findings, &mut table)?;
    write_file(&c.out, "audit.txt", &table)?;
    print!("{}", String::from_utf8_lossy(&table));
    Ok(if findings.count(Verdict::MishandledNotSwapped) > 0 {
        EXIT_MISHANDLED
    } else if findings.count(Verdict::TimingChannelConditional) > 0 {
        EXIT_TIMING
    } else {
        EXIT_OK
    })
}
