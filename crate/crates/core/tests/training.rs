mod common;

use std::collections::BTreeMap;

use headpop::corpus::{label_by_group_median, parse_csv, parse_jsonl, to_jsonl, Headline, Label};
use headpop::training::{
    emit_table, evaluate, fit, parse_table, run_kfold, EvalReport, PlateauSchedule, StopReason,
    TrainConfig,
};
use headpop::{synth, Error, ModelKind};

use common::{brute_force_labels, labeled};

fn small_lstm(seed: u64) -> TrainConfig {
    TrainConfig {
        model_kind: ModelKind::Lstm,
        hidden: 4,
        embed_dim: 4,
        batch_size: 8,
        max_epochs: 20,
        seed,
        ..Default::default()
    }
}

#[test]
fn plateau_decay_is_visible_in_report() {
    let data = synth::marker_corpus(40, synth::DEFAULT_MARKER, 4).unwrap();
    let config = TrainConfig {
        learning_rate: 1e-12,
        max_epochs: 30,
        ..small_lstm(1)
    };
    let (_, report) = fit(&data, &config).unwrap();
    // nothing improves by more than min_delta: stop after 1 + patience epochs
    assert_eq!(report.stop_reason, StopReason::EarlyStop);
    assert_eq!(report.epochs.len(), 1 + config.early_stop_patience);
    let mut lr = config.learning_rate;
    for (i, rec) in report.epochs.iter().enumerate() {
        let epoch = i + 1;
        assert_eq!(rec.epoch, epoch);
        assert_eq!(rec.learning_rate, lr, "epoch {epoch}");
        // reduction after epochs 4, 7, 10
        if epoch > 1 && (epoch - 1) % config.plateau_patience == 0 {
            lr *= config.plateau_factor;
        }
    }
    assert!(report.epochs.last().unwrap().learning_rate < config.learning_rate * 0.01);
}

#[test]
fn schedule_on_increasing_losses() {
    let mut s = PlateauSchedule::new(3, 10, 1e-4);
    let mut reductions = Vec::new();
    let mut stopped = None;
    for epoch in 1..=50 {
        let a = s.observe(epoch, epoch as f64);
        assert_eq!(a.checkpoint, epoch == 1);
        if a.reduce_lr {
            reductions.push(epoch);
        }
        if a.stop {
            stopped = Some(epoch);
            break;
        }
    }
    assert_eq!(stopped, Some(11));
    assert_eq!(reductions, [4, 7, 10]);
    assert_eq!(s.best_epoch(), 1);
}

#[test]
fn max_epochs_bounds_training() {
    let data = synth::marker_corpus(40, synth::DEFAULT_MARKER, 4).unwrap();
    let config = TrainConfig {
        max_epochs: 2,
        ..small_lstm(3)
    };
    let (_, report) = fit(&data, &config).unwrap();
    assert_eq!(report.epochs.len(), 2);
    assert_eq!(report.stop_reason, StopReason::MaxEpochs);
    assert_eq!(report.train_size + report.validation_size, 40);
}

#[test]
fn single_class_data_is_rejected() {
    let data: Vec<_> = (0..10).map(|i| labeled(&format!("x{i}"), "same words", Label::Popular)).collect();
    assert!(matches!(fit(&data, &small_lstm(0)), Err(Error::Data(_))));
}

#[test]
fn evaluate_matches_recount() {
    let data = synth::marker_corpus(60, synth::DEFAULT_MARKER, 8).unwrap();
    let (model, _) = fit(&data[..40], &small_lstm(2)).unwrap();
    let test = &data[40..];
    let report = evaluate(&model, test).unwrap();
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for e in test {
        let popular = model.score_title(e.title()).unwrap() > 0.5;
        match (popular, e.label) {
            (true, Label::Popular) => tp += 1,
            (true, Label::Unpopular) => fp += 1,
            (false, Label::Unpopular) => tn += 1,
            (false, Label::Popular) => fn_ += 1,
        }
    }
    assert_eq!((report.tp, report.fp, report.tn, report.fn_), (tp, fp, tn, fn_));
    assert_eq!(report.n, test.len());
    assert_eq!(report.accuracy, (tp + tn) as f64 / test.len() as f64);

    let mut shuffled = test.to_vec();
    shuffled.reverse();
    shuffled.rotate_left(7);
    assert_eq!(evaluate(&model, &shuffled).unwrap(), report);
}

#[test]
fn empty_eval_is_an_error() {
    assert!(EvalReport::from_scores(Vec::<(f64, Label)>::new()).is_err());
}

#[test]
fn kfold_tests_each_example_once() {
    let data = synth::marker_corpus(10, synth::DEFAULT_MARKER, 1).unwrap();
    let config = TrainConfig {
        model_kind: ModelKind::BowSvm,
        seed: 4,
        ..Default::default()
    };
    let report = run_kfold(&data, &config, 5).unwrap();
    assert_eq!(report.folds.len(), 5);
    assert_eq!(report.folds.iter().map(|f| f.test_size).sum::<usize>(), 10);
    for f in &report.folds {
        assert_eq!(f.test_size, 2);
        assert_eq!(f.train_size, 8);
        assert_eq!(f.eval.n, 2);
    }
}

#[test]
fn kfold_on_separable_data_is_perfect() {
    let data = synth::marker_corpus(100, synth::DEFAULT_MARKER, 6).unwrap();
    let config = TrainConfig {
        model_kind: ModelKind::BowSvm,
        seed: 2,
        ..Default::default()
    };
    let report = run_kfold(&data, &config, 5).unwrap();
    assert_eq!(report.mean_accuracy, 1.0);
    assert_eq!(report.std_accuracy, 0.0);
    assert_eq!(report, run_kfold(&data, &config, 5).unwrap());

    let table = emit_table(std::slice::from_ref(&report.row)).unwrap();
    let rows = parse_table(&table).unwrap();
    assert_eq!(rows[0].model, "BoW + SVM");
    assert_eq!(rows[0].accuracy, 1.0);
}

#[test]
fn kfold_rejects_bad_k() {
    let data = synth::marker_corpus(10, synth::DEFAULT_MARKER, 1).unwrap();
    assert!(run_kfold(&data, &TrainConfig::default(), 1).is_err());
    assert!(run_kfold(&data, &TrainConfig::default(), 11).is_err());
}

#[test]
fn four_row_labeling_fixture() {
    // group a: metrics 1, 2, 3 -> median 2; group b: 5, 7 -> median 6
    let csv = "id,title,metric,group\n\
               1,one,1,a\n2,two,2,a\n3,three,3,a\n4,four,5,b\n5,five,7,b\n";
    let labels: Vec<Label> = label_by_group_median(parse_csv(csv).unwrap())
        .unwrap()
        .into_iter()
        .map(|e| e.label)
        .collect();
    use Label::*;
    assert_eq!(labels, [Unpopular, Unpopular, Popular, Unpopular, Popular]);
}

#[test]
fn labeling_matches_brute_force_with_ties() {
    let data: Vec<Headline> = (0..200)
        .map(|i| Headline::new(format!("h{i}"), "t", ((i * 37) % 9) as f64, format!("g{}", i % 7)).unwrap())
        .collect();
    let fast: BTreeMap<_, _> = label_by_group_median(data.clone())
        .unwrap()
        .into_iter()
        .map(|e| (e.headline.id, e.label))
        .collect();
    let slow: BTreeMap<_, _> = brute_force_labels(&data).into_iter().collect();
    assert_eq!(fast, slow);
}

#[test]
fn jsonl_and_csv_agree() {
    let jsonl = "{\"id\":\"a\",\"title\":\"Hello, world\",\"metric\":3.5,\"group\":\"x\"}\n\n\
                 {\"id\":\"b\",\"title\":\"Bye\",\"metric\":1,\"group\":\"x\"}\n";
    let csv = "id,title,metric,group\na,\"Hello, world\",3.5,x\nb,Bye,1,x\n";
    assert_eq!(parse_jsonl(jsonl).unwrap(), parse_csv(csv).unwrap());
}

#[test]
fn duplicate_ids_report_the_line() {
    let jsonl = "{\"id\":\"a\",\"title\":\"x\",\"metric\":1,\"group\":\"g\"}\n\
                 {\"id\":\"a\",\"title\":\"y\",\"metric\":2,\"group\":\"g\"}\n";
    match parse_jsonl(jsonl) {
        Err(Error::DuplicateId { id, line }) => assert_eq!((id.as_str(), line), ("a", 2)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn bad_records_are_parse_errors() {
    assert!(matches!(parse_jsonl("{\"id\":\"a\"}"), Err(Error::Parse { line: 1, .. })));
    assert!(matches!(parse_csv("id,title\n1,x\n"), Err(Error::Parse { line: 1, .. })));
    assert!(parse_jsonl("{\"id\":\"a\",\"title\":\"x\",\"metric\":\"lots\",\"group\":\"g\"}").is_err());
}

#[test]
fn labeled_jsonl_round_trips() {
    let data = synth::marker_corpus(12, synth::DEFAULT_MARKER, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    std::fs::write(&path, to_jsonl(&data)).unwrap();
    let back = headpop::corpus::load_labeled(&path, headpop::corpus::DatasetFormat::Jsonl).unwrap();
    assert_eq!(back, data);
}

#[test]
fn fold_plan_covers_every_id_once() {
    let data = synth::marker_corpus(23, synth::DEFAULT_MARKER, 2).unwrap();
    let plan = headpop::corpus::make_folds(&data, 5, 9).unwrap();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for fold in 0..5 {
        let (train, test) = plan.split(&data, fold);
        assert_eq!(train.len() + test.len(), 23);
        for e in test {
            *seen.entry(e.id().to_string()).or_default() += 1;
        }
    }
    assert_eq!(seen.len(), 23);
    assert!(seen.values().all(|&c| c == 1));
}
