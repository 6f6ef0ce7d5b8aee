use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use fdi_core::causal::{check_independence, Dag, Statement, Variable};
use fdi_core::eb::{
    build_eb_fsm_detailed, build_features, read_forest, stratified_split, trace_rows, train as train_forest,
    write_forest,
};
use fdi_core::io::{fmt_sig9, read_trace, read_traces, write_dataset, write_residuals, write_trace};
use fdi_core::maturity::{
    assess as assess_profile, profile_from_pipeline, CapabilityProfile, CausalityMode, Decision, PipelineArtifacts,
    PipelineKind,
};
use fdi_core::mb::{calibrate_thresholds, case_study_mb_fsm, diagnose, Thresholds};
use fdi_core::{simulate as run_sim, FaultSignatureMatrix, Label, NoiseSpec, Trace};

use crate::config::{label_for, Settings};
use crate::error::CliError;
use crate::{
    Artifact, AssessArgs, ClassifyArgs, DatasetArgs, DsepArgs, Format, ImportanceArgs, IndependenceArgs, Pipeline,
    ResidualArgs, Scenario, SimulateArgs, TrainArgs,
};

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes to `path`, or to stdout when there is none.
fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn computed_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.computed.csv"))
}

pub fn simulate(s: &Settings, a: &SimulateArgs) -> Result<(), CliError> {
    let fault = match a.scenario {
        Some(Scenario::Healthy) => None,
        Some(Scenario::R0Down) => Label::R0Down.default_fault(),
        Some(Scenario::CapUp) => Label::CapUp.default_fault(),
        None => s.fault,
    };
    let noise = match a.sigma {
        Some(0.0) => None,
        Some(sigma) => Some(
            NoiseSpec::new(sigma, s.noise.map_or(s.seed, |n| n.seed)).map_err(|e| CliError::Config(e.to_string()))?,
        ),
        None => s.noise,
    };
    let label = label_for(fault.as_ref());
    let tag = |t: Trace| match label {
        Some(l) => t.with_label(l),
        None => t,
    };
    let trace = tag(run_sim(&s.params, &s.schedule, fault.as_ref(), noise.as_ref(), &s.sim)?);
    emit(a.out.as_deref(), &write_trace(&trace))?;
    if a.computed {
        let out = a.out.as_deref().expect("clap requires --out with --computed");
        let model = tag(run_sim(&s.params, &s.schedule, fault.as_ref(), None, &s.sim)?);
        write(&computed_path(out), &write_trace(&model))?;
    }
    Ok(())
}

pub fn dataset(s: &Settings, a: &DatasetArgs) -> Result<(), CliError> {
    let train = s.case_study.training_traces()?;
    write(&a.out, &write_dataset(&train)?)?;
    println!(
        "training: {} traces, {} samples",
        train.len(),
        train.iter().map(Trace::len).sum::<usize>()
    );
    if let Some(v) = &a.validation {
        let val = s.case_study.validation_traces()?;
        write(v, &write_dataset(&val)?)?;
        println!(
            "validation: {} traces, {} samples",
            val.len(),
            val.iter().map(Trace::len).sum::<usize>()
        );
    }
    Ok(())
}

fn thresholds(s: &Settings, calibrate: Option<&Path>) -> Result<Thresholds, CliError> {
    if let Some(t) = s.thresholds {
        return Ok(t);
    }
    let healthy = match calibrate {
        Some(p) => read_traces(&read(p)?)?,
        None => s
            .case_study
            .training_traces()?
            .into_iter()
            .filter(|t| t.label == Some(Label::Healthy))
            .collect(),
    };
    let mut thr = calibrate_thresholds(&healthy, &s.params, s.k)?;
    thr.debounce = s.debounce;
    Ok(thr)
}

pub fn residuals(s: &Settings, a: &ResidualArgs) -> Result<(), CliError> {
    let trace = read_trace(&read(&a.trace)?)?;
    let thr = thresholds(s, a.calibrate.as_deref())?;
    let report = diagnose(&trace, &s.params, &thr)?;
    if let Some(out) = &a.out {
        write(out, &write_residuals(&report.residuals))?;
    }
    let [act1, act2] = report.residuals.activation();
    println!(
        "thresholds: thr1 = {} A, thr2 = {} V, debounce = {}",
        fmt_sig9(thr.thr1),
        fmt_sig9(thr.thr2),
        thr.debounce
    );
    println!("max |r1|: {} A", fmt_sig9(report.residuals.max_abs_r1()));
    println!("max |r2|: {} V", fmt_sig9(report.residuals.max_abs_r2()));
    println!("active: ARR_1 = {}, ARR_2 = {}", u8::from(act1), u8::from(act2));
    let mut summary = report.isolation.to_string();
    if let Some(r0) = report.r0_estimate {
        let _ = write!(summary, "; R0 ≈ {r0:.1e} Ω");
    }
    if let Some(tau) = report.tau_estimate {
        let _ = write!(summary, "; τ ≈ {tau:.1} s");
    }
    println!("{summary}");
    Ok(())
}

pub fn train(s: &Settings, a: &TrainArgs) -> Result<(), CliError> {
    let traces = read_traces(&read(&a.dataset)?)?;
    let fm = build_features(&traces)?;
    let (train_set, held) = if a.split {
        let (t, h) = stratified_split(&fm, s.forest.seed);
        (t, Some(h))
    } else {
        (fm, None)
    };
    let forest = train_forest(&train_set, &s.forest)?;
    write(&a.out, &write_forest(&forest))?;
    let classes: Vec<&str> = forest.classes().iter().map(Label::as_str).collect();
    println!(
        "trained {} trees on {} rows; classes: {}",
        forest.trees().len(),
        train_set.n_rows(),
        classes.join(", ")
    );
    println!("training accuracy: {}", fmt_sig9(forest.accuracy(&train_set)?));
    if let Some(h) = held {
        println!(
            "held-out accuracy: {} ({} rows)",
            fmt_sig9(forest.accuracy(&h)?),
            h.n_rows()
        );
    }
    Ok(())
}

pub fn classify(a: &ClassifyArgs) -> Result<(), CliError> {
    let forest = read_forest(&read(&a.model)?)?;
    let traces = read_traces(&read(&a.dataset)?)?;
    let mut csv = String::from("trace,t,label,predicted");
    for c in forest.classes() {
        let _ = write!(csv, ",p_{c}");
    }
    csv.push('\n');
    let (mut hits, mut rows, mut trace_hits) = (0usize, 0usize, 0usize);
    let labeled = traces.iter().all(|t| t.label.is_some());
    for (i, trace) in traces.iter().enumerate() {
        let feats = trace_rows(trace).ok_or(fdi_core::EbError::NoTransition(i))?;
        let first = trace.samples().len() - feats.len();
        let label = trace.label.map_or("", |l| l.as_str());
        for (k, row) in feats.iter().enumerate() {
            let p = forest.predict(row)?;
            let _ = write!(
                csv,
                "{i},{},{label},{}",
                fmt_sig9(trace.samples()[first + k].t),
                p.class
            );
            for q in &p.distribution {
                let _ = write!(csv, ",{}", fmt_sig9(*q));
            }
            csv.push('\n');
            hits += usize::from(trace.label == Some(p.class));
            rows += 1;
        }
        let verdict = forest.trace_verdict(trace)?;
        trace_hits += usize::from(trace.label == Some(verdict));
        println!(
            "trace {i}: {verdict}{}",
            trace.label.map_or(String::new(), |l| format!(" (label {l})"))
        );
    }
    if let Some(out) = &a.out {
        write(out, &csv)?;
    }
    if labeled {
        println!("accuracy: {} ({rows} rows)", fmt_sig9(hits as f64 / rows as f64));
        println!(
            "trace accuracy: {} ({} traces)",
            fmt_sig9(trace_hits as f64 / traces.len() as f64),
            traces.len()
        );
    }
    Ok(())
}

fn analysis(fsm: &FaultSignatureMatrix) -> Result<String, CliError> {
    let mut out = String::new();
    for f in fsm.faults() {
        let d = fsm.detectable(f)?;
        let i = fsm.isolable(f)?;
        let verdict = match (d, i) {
            (false, _) => "not detectable",
            (true, true) => "detectable, isolable",
            (true, false) => "detectable, not isolable",
        };
        let _ = writeln!(out, "{f}: {verdict}");
    }
    Ok(out)
}

pub fn importance(s: &Settings, a: &ImportanceArgs) -> Result<(), CliError> {
    let traces = read_traces(&read(&a.dataset)?)?;
    let detail = build_eb_fsm_detailed(&traces, &s.forest)?;
    let table = detail.fsm.to_table(2);
    print!("{table}");
    for (f, acc) in detail.fsm.faults().iter().zip(&detail.held_out_accuracy) {
        println!("held-out accuracy {f} vs Healthy: {}", fmt_sig9(*acc));
    }
    if let Some(out) = &a.out {
        write(out, &table)?;
    }
    if a.analyze {
        let bin = detail.fsm.binarize(s.binarize);
        println!();
        print!("{}", bin.to_table(0));
        print!("{}", analysis(&bin)?);
    }
    Ok(())
}

pub fn fsm_mb() -> Result<(), CliError> {
    let fsm = case_study_mb_fsm();
    print!("{}", fsm.to_table(0));
    print!("{}", analysis(&fsm)?);
    Ok(())
}

pub fn fsm_analyze(s: &Settings, file: &Path) -> Result<(), CliError> {
    let fsm = FaultSignatureMatrix::parse(&read(file)?)?;
    let fsm = if fsm.is_binary() { fsm } else { fsm.binarize(s.binarize) };
    print!("{}", analysis(&fsm)?);
    Ok(())
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn set(names: &[String]) -> String {
    format!("{{{}}}", names.join(", "))
}

pub fn dsep(a: &DsepArgs) -> Result<(), CliError> {
    let dag = Dag::parse(&read(&a.dag)?)?;
    let human = matches!(a.format, Format::Human | Format::Both);
    let machine = matches!(a.format, Format::Machine | Format::Both);
    let mut did = false;
    if a.factorization {
        did = true;
        if human {
            println!("factorization: {}", dag.factorization_string());
        }
        if machine {
            for (i, f) in dag.factorization().iter().enumerate() {
                println!("factor.{i}.variable = {}", f.variable);
                println!("factor.{i}.parents = {}", f.parents.join(","));
            }
        }
    }
    if let Some(k) = a.implied {
        did = true;
        for (i, st) in dag.implied_independencies(k).iter().enumerate() {
            if human {
                println!("{st}");
            }
            if machine {
                println!("implied.{i} = {};{};{}", st.x, st.y, st.z.join(","));
            }
        }
    }
    if !a.x.is_empty() || !a.y.is_empty() {
        if a.x.is_empty() || a.y.is_empty() {
            return Err(CliError::Config("--x and --y must both be given".into()));
        }
        did = true;
        let sep = dag.d_separated(&refs(&a.x), &refs(&a.y), &refs(&a.given))?;
        if human {
            println!(
                "{} and {} given {}: {}",
                set(&a.x),
                set(&a.y),
                set(&a.given),
                if sep { "d-separated" } else { "d-connected" }
            );
        }
        if machine {
            println!("d_separated = {sep}");
        }
    }
    if !did {
        return Err(CliError::Config(
            "nothing to do: give --x/--y, --factorization or --implied".into(),
        ));
    }
    Ok(())
}

fn variable(s: &str) -> Result<Variable, CliError> {
    if s == "label" {
        return Ok(Variable::Label);
    }
    if let Some(l) = s.strip_prefix("label=") {
        return Ok(Variable::LabelIs(
            l.parse()
                .map_err(|e: fdi_core::ModelError| CliError::Config(e.to_string()))?,
        ));
    }
    Ok(Variable::Column(s.to_string()))
}

pub fn independence(s: &Settings, a: &IndependenceArgs) -> Result<(), CliError> {
    let traces = read_traces(&read(&a.dataset)?)?;
    let fm = build_features(&traces)?;
    let statement = Statement {
        x: variable(&a.x)?,
        y: variable(&a.y)?,
        z: a.given.iter().map(|g| variable(g)).collect::<Result<_, _>>()?,
    };
    let r = check_independence(&fm, &statement, &s.independence)?;
    let z: Vec<String> = statement.z.iter().map(ToString::to_string).collect();
    println!("statement: {} _||_ {} | {}", statement.x, statement.y, set(&z));
    println!("verdict: {}", r.verdict);
    println!("g: {}", fmt_sig9(r.g_statistic));
    println!("dof: {}", r.dof);
    println!("p: {}", fmt_sig9(r.p_value));
    println!("strata: {}", r.strata);
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    decisions: Vec<String>,
    causality: String,
    #[serde(default)]
    translation_notes: Vec<String>,
    #[serde(default)]
    computability_notes: Vec<String>,
}

fn load_profile(path: &Path) -> Result<CapabilityProfile, CliError> {
    let p: ProfileFile = toml::from_str(&read(path)?).map_err(|e| CliError::Config(e.to_string()))?;
    let decisions = p
        .decisions
        .iter()
        .map(|d| d.parse::<Decision>())
        .collect::<Result<BTreeSet<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(CapabilityProfile {
        computed_decisions: decisions,
        causality_mode: p
            .causality
            .parse::<CausalityMode>()
            .map_err(|e| CliError::Config(e.to_string()))?,
        translation_notes: p.translation_notes,
        computability_notes: p.computability_notes,
    })
}

pub fn assess(a: &AssessArgs) -> Result<(), CliError> {
    let profile = match (&a.profile, a.pipeline) {
        (Some(path), _) => load_profile(path)?,
        (None, Some(p)) => {
            let kind = match p {
                Pipeline::Mb => PipelineKind::ModelBased,
                Pipeline::Eb => PipelineKind::ExperienceBased,
            };
            let mut arts = PipelineArtifacts::full(kind);
            for w in &a.without {
                match w {
                    Artifact::Fsm => arts.fsm = false,
                    Artifact::Thresholds => arts.thresholds = false,
                    Artifact::Identifiers => arts.identifiers = false,
                    Artifact::Model => arts.trained_model = false,
                }
            }
            profile_from_pipeline(kind, arts)?
        }
        (None, None) => unreachable!("clap requires --pipeline or --profile"),
    };
    let report = assess_profile(&profile);
    if matches!(a.format, Format::Human | Format::Both) {
        print!("{}", report.to_text());
    }
    if a.format == Format::Both {
        println!();
    }
    if matches!(a.format, Format::Machine | Format::Both) {
        print!("{}", report.to_tree());
    }
    Ok(())
}
