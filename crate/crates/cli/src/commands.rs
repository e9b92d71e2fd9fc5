use std::fs;
use std::io::Write;
use std::path::Path;

use headpop::corpus::{self, Label, LabeledExample};
use headpop::persist::write_atomic;
use headpop::training::{
    emit_table, evaluate, evaluate_refs, fit, run_kfold, stratified_split, EvalReport, FitReport, KFoldReport,
    TrainConfig,
};
use headpop::{load_model, save_model, synth, Model};
use headpop_service::{router, serve, ServiceConfig, ServiceState};
use serde::Serialize;

use crate::args::{EvalArgs, IntrospectArgs, LabelArgs, ServeArgs, SynthArgs, SynthKind, TitleArgs, TrainArgs};
use crate::error::CliError;

type CliResult<T = ()> = Result<T, CliError>;

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

pub fn label(args: &LabelArgs) -> CliResult {
    let data = corpus::load_dataset(&args.input.data, args.input.format())?;
    let labeled = corpus::label_by_group_median(data)?;
    let popular = labeled.iter().filter(|e| e.label == Label::Popular).count();
    log::info!("labeled {} headlines, {popular} popular", labeled.len());
    emit(args.out.as_deref(), &corpus::to_jsonl(&labeled))
}

fn train_config(args: &TrainArgs) -> CliResult<TrainConfig> {
    let mut config = match &args.train.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    args.train.apply(&mut config);
    config.validate()?;
    Ok(config)
}

#[derive(Serialize)]
struct HoldoutReport<'a> {
    config: &'a TrainConfig,
    fit: &'a FitReport,
    test: &'a EvalReport,
}

#[derive(Serialize)]
struct KFoldOutput<'a> {
    config: &'a TrainConfig,
    kfold: &'a KFoldReport,
    table: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_fit: Option<&'a FitReport>,
}

pub fn train(args: &TrainArgs) -> CliResult {
    let config = train_config(args)?;
    if args.kfold.is_none() && args.model_out.is_none() {
        return Err(CliError::usage("train needs --model-out unless --kfold is given"));
    }
    let data = corpus::load_labeled(&args.input.data, args.input.format())?;
    match args.kfold {
        Some(k) => {
            let report = run_kfold(&data, &config, k)?;
            log::info!(
                "{k}-fold accuracy {:.4} +/- {:.4}",
                report.mean_accuracy,
                report.std_accuracy
            );
            // with --model-out, the saved model is trained on all the data
            let final_fit = match &args.model_out {
                Some(path) => {
                    let (model, fit_report) = fit(&data, &config)?;
                    save_model(&model, path)?;
                    Some(fit_report)
                }
                None => None,
            };
            let out = KFoldOutput {
                config: &config,
                kfold: &report,
                table: emit_table(std::slice::from_ref(&report.row))?,
                final_fit: final_fit.as_ref(),
            };
            emit(args.report_out.as_deref(), &to_json(&out))
        }
        None => {
            let (rest, test) = stratified_split(&data, args.test_fraction, config.seed)?;
            let rest: Vec<LabeledExample> = rest.into_iter().cloned().collect();
            let (model, fit_report) = fit(&rest, &config)?;
            let test_report = evaluate_refs(&model, test)?;
            log::info!(
                "best epoch {}; test accuracy {:.4} on {} examples",
                fit_report.best_epoch,
                test_report.accuracy,
                test_report.n
            );
            save_model(&model, args.model_out.as_deref().expect("checked above"))?;
            let out = HoldoutReport {
                config: &config,
                fit: &fit_report,
                test: &test_report,
            };
            emit(args.report_out.as_deref(), &to_json(&out))
        }
    }
}

pub fn eval(args: &EvalArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let data = corpus::load_labeled(&args.input.data, args.input.format())?;
    let report = evaluate(&model, &data)?;
    emit(None, &to_json(&report))
}

fn load_for_title(args: &TitleArgs) -> CliResult<Model> {
    if args.title.trim().is_empty() {
        return Err(headpop::Error::EmptyTitle.into());
    }
    Ok(load_model(&args.model)?)
}

pub fn predict(args: &TitleArgs) -> CliResult {
    let model = load_for_title(args)?;
    let p = model.predict(&args.title)?;
    let out = serde_json::json!({
        "probability": p.probability,
        "label": p.label.name(),
    });
    emit(None, &out.to_string())
}

pub fn introspect(args: &IntrospectArgs) -> CliResult {
    let model = load_for_title(&args.title)?;
    let title = &args.title.title;
    let intro = model.introspect(title)?;
    let p = model.predict(title)?;
    if args.json {
        let tokens: Vec<_> = intro
            .contributions
            .iter()
            .map(|c| serde_json::json!({"token": c.token, "contribution": c.score}))
            .collect();
        let out = serde_json::json!({
            "probability": p.probability,
            "label": p.label.name(),
            "fused_score": intro.fused_score,
            "tokens": tokens,
        });
        return emit(None, &out.to_string());
    }
    let width = intro
        .contributions
        .iter()
        .map(|c| c.token.chars().count())
        .chain(["token".len()])
        .max()
        .unwrap_or(0);
    let mut text = format!("probability {:.4} ({})\n\n", p.probability, p.label.name());
    text.push_str(&format!("{:<width$}  contribution\n", "token"));
    for c in &intro.contributions {
        let bar = "#".repeat((c.score * 20.0).round() as usize);
        text.push_str(&format!("{:<width$}  {:.4}  {bar}\n", c.token, c.score));
    }
    emit(None, &text)
}

pub fn serve_cmd(args: &ServeArgs) -> CliResult {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::io(format!("bind {addr}: {e}")))?;
        let state = ServiceState::empty();
        let config = ServiceConfig {
            cors_origin: args.cors_origin.clone(),
        };
        let app = router(state.clone(), &config).map_err(CliError::usage)?;
        let path = args.model.clone();
        let loader = tokio::task::spawn_blocking(move || load_model(&path));
        let server = serve(listener, app);
        tokio::pin!(server);
        tokio::select! {
            done = &mut server => return Ok(done?),
            loaded = loader => {
                let model = loaded.map_err(|e| CliError::io(e.to_string()))??;
                state.install(model).map_err(CliError::usage)?;
                log::info!("model {} ready", args.model.display());
            }
        }
        Ok(server.await?)
    })
}

pub fn synth_cmd(args: &SynthArgs) -> CliResult {
    let data = match args.kind {
        SynthKind::Marker => synth::marker_corpus(args.n, synth::DEFAULT_MARKER, args.seed)?,
        SynthKind::Order => synth::order_corpus(args.n, args.seed)?,
        SynthKind::Cue => {
            let corpus = synth::cue_corpus(args.n, 40, args.seed)?;
            if let Some(path) = &args.glove_out {
                let vectors = corpus.pretrained(args.glove_dim, args.seed)?;
                let mut words: Vec<&String> =
                    corpus.positive.iter().chain(&corpus.negative).chain(&corpus.fillers).collect();
                words.sort();
                let mut text = String::new();
                for w in words {
                    let v = vectors.get(w).expect("every corpus word has a vector");
                    let comps: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                    text.push_str(&format!("{w} {}\n", comps.join(" ")));
                }
                write_atomic(path, text.as_bytes())?;
            }
            corpus.examples
        }
    };
    if args.glove_out.is_some() && !matches!(args.kind, SynthKind::Cue) {
        return Err(CliError::usage("--glove-out only applies to --kind cue"));
    }
    write_atomic(&args.out, corpus::to_jsonl(&data).as_bytes())?;
    Ok(())
}
