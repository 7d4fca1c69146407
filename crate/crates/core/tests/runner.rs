use mdcs::data::{gaussian_means, shot_partition, synth_gaussians, AugmentPolicy, ShotThresholds};
use mdcs::metrics::PredictionDump;
use mdcs::net::{CosineHead, MultiExpertModel};
use mdcs::runner::*;
use mdcs::seed;
use mdcs::Error;
use ndarray::Array2;

fn small() -> TrainConfig {
    TrainConfig::parse(
        "classes = 4\nn_max = 60\nbeta = 10\ndim = 4\ntest_per_class = 10\nhidden = 8\nepochs = 3\nbatch_size = 16\n",
    )
    .unwrap()
}

#[test]
fn zero_epochs_returns_initialization() {
    let mut cfg = small();
    cfg.epochs = 0;
    let data = prepare_data(&cfg).unwrap();
    let outcome = train(&cfg, &data.train).unwrap();
    let init = MultiExpertModel::init(
        4,
        &cfg.hidden,
        4,
        &cfg.lambdas,
        cfg.scale,
        seed::derive(cfg.seed, &[3]),
    )
    .unwrap();
    assert_eq!(outcome.model(), &init);
    assert!(outcome.log.is_empty());
}

#[test]
fn training_is_deterministic() {
    let cfg = small();
    let data = prepare_data(&cfg).unwrap();
    let a = train(&cfg, &data.train).unwrap();
    let b = train(&cfg, &data.train).unwrap();
    assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
    let mut other = cfg.clone();
    other.seed = 1;
    let c = train(&other, &prepare_data(&other).unwrap().train).unwrap();
    assert_ne!(a.checkpoint.to_bytes(), c.checkpoint.to_bytes());
}

#[test]
fn log_records_every_epoch_and_expert() {
    let cfg = small();
    let data = prepare_data(&cfg).unwrap();
    let out = train(&cfg, &data.train).unwrap();
    assert_eq!(out.log.len(), 3);
    for (e, entry) in out.log.iter().enumerate() {
        assert_eq!(entry.epoch, e);
        assert_eq!(entry.experts.len(), 3);
        for x in &entry.experts {
            assert!(x.dl > 0.0 && x.cs >= 0.0);
            assert!((0.0..=1.0).contains(&x.confident_fraction));
        }
    }
    let mut csv = Vec::new();
    out.write_log(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("epoch,lr,total,dl_0,cs_0,confident_0,"));
    assert_eq!(text.lines().count(), 4);
}

/// Single expert, lambda 0, no augmentation, no consistency term: plain
/// cross-entropy. Full-batch steps on a separable two-class problem never
/// increase the loss.
#[test]
fn plain_cross_entropy_loss_does_not_increase() {
    let cfg = TrainConfig::parse(
        "classes = 2\nbeta = 1\nn_max = 40\ndim = 2\nseparation = 12\nhidden = none\nM = 1\nlambda = 0\n\
         alpha = 0\nepochs = 50\nbatch_size = 80\nlr = 0.05\nmomentum = 0\nweight_decay = 0\nnesterov = false\n\
         weak_jitter = 0\nstrong_jitter = 0\nstrong_dropout = 0\nstrong_scale_min = 1\nstrong_scale_max = 1\n",
    )
    .unwrap();
    assert_eq!(cfg.weak, AugmentPolicy::identity());
    let data = prepare_data(&cfg).unwrap();
    let out = train(&cfg, &data.train).unwrap();
    for pair in out.log.windows(2) {
        assert!(pair[1].total <= pair[0].total, "{} -> {}", pair[0].total, pair[1].total);
    }
    assert!(out.log.last().unwrap().total < out.log[0].total);
}

#[test]
fn zero_alpha_ignores_consistency_settings() {
    let mut a = small();
    a.distill.alpha = 0.0;
    let mut b = a.clone();
    b.distill.temperature = 7.0;
    b.distill.detach_teacher = false;
    let data = prepare_data(&a).unwrap();
    let ta = train(&a, &data.train).unwrap();
    let tb = train(&b, &data.train).unwrap();
    assert_eq!(ta.checkpoint.to_bytes(), tb.checkpoint.to_bytes());
    let total: Vec<f64> = ta.log.iter().map(|e| e.total).collect();
    let dl: Vec<f64> = ta.log.iter().map(|e| e.experts.iter().map(|x| x.dl).sum()).collect();
    for (t, d) in total.iter().zip(&dl) {
        assert!((t - d).abs() < 1e-12);
    }
}

#[test]
fn non_finite_loss_aborts_with_location() {
    let mut cfg = small();
    cfg.scale = 1e308;
    let data = prepare_data(&cfg).unwrap();
    match train(&cfg, &data.train) {
        Err(Error::Numeric(msg)) => {
            assert!(msg.contains("epoch 0") && msg.contains("batch 0") && msg.contains("expert"), "{msg}");
        }
        other => panic!("expected a numeric error, got {other:?}"),
    }
}

#[test]
fn perfect_classifier_scores_one() {
    let means = gaussian_means(3, 3, 200.0);
    let counts = [150, 50, 5];
    let data = synth_gaussians(3, 3, &counts, 200.0, 11).unwrap();
    let split = shot_partition(&counts, ShotThresholds::default()).unwrap();
    let heads = vec![
        CosineHead {
            weight: means.clone(),
            scale: 16.0,
            lambda: 1.0,
        };
        2
    ];
    let model = MultiExpertModel::from_parts(Vec::new(), heads).unwrap();
    let cfg = TrainConfig::default();
    let (report, _) = evaluate(&model, &data, &split, &cfg).unwrap();
    for row in report.rows() {
        assert_eq!(row.values.columns(), [Some(1.0); 4], "{}", row.name);
    }
}

#[test]
fn evaluate_rejects_incompatible_model() {
    let cfg = small();
    let data = prepare_data(&cfg).unwrap();
    let model = MultiExpertModel::init(5, &[3], 4, &[1.0], 16.0, 0).unwrap();
    assert!(matches!(
        evaluate(&model, &data.test, &data.split, &cfg),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn dump_round_trip_reproduces_report() {
    let cfg = small();
    let data = prepare_data(&cfg).unwrap();
    let out = train(&cfg, &data.train).unwrap();
    let (report, dump) = evaluate(out.model(), &data.test, &data.split, &cfg).unwrap();
    let reread = PredictionDump::read_csv(dump.to_csv_string().as_bytes()).unwrap();
    let again = report_from_dump(&reread, &data.split, &cfg).unwrap();
    for format in [Format::Text, Format::Csv, Format::Json] {
        assert_eq!(report.render(format), again.render(format));
    }
}

#[test]
fn report_has_expert_ensemble_and_sigma_rows() {
    let cfg = small();
    let data = prepare_data(&cfg).unwrap();
    let out = train(&cfg, &data.train).unwrap();
    let (report, _) = evaluate(out.model(), &data.test, &data.split, &cfg).unwrap();
    let csv = report.render(Format::Csv);
    let names: Vec<&str> = csv.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["row", "E1", "E2", "E3", "Ensemble", "sigma"]);
    assert!(csv.lines().all(|l| l.split(',').count() == 5));
    let text = report.render(Format::Text);
    assert!(text.contains("Many") && text.contains("Medium") && text.contains("Few") && text.contains("All"));
    // The echoed config reproduces the run.
    let echoed: String = text
        .lines()
        .skip_while(|l| !l.starts_with("# config"))
        .skip(1)
        .map(|l| format!("{}\n", &l[2..]))
        .collect();
    assert_eq!(TrainConfig::parse(&echoed).unwrap(), cfg);
}

#[test]
fn variance_of_untrained_identical_members_is_zero() {
    let mut cfg = small();
    cfg.epochs = 0;
    let data = prepare_data(&cfg).unwrap();
    let report = variance_protocol(&cfg, &data, 3, false).unwrap();
    assert_eq!(report.columns.len(), 1);
    assert_eq!(report.columns[0].variance.all, Some(0.0));
}

#[test]
fn paired_variance_reports_both_columns() {
    let cfg = small();
    let data = prepare_data(&cfg).unwrap();
    let report = variance_protocol(&cfg, &data, 2, true).unwrap();
    let names: Vec<&str> = report.columns.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["w/o CS", "w/ CS"]);
    assert_eq!(report.columns[0].alpha, 0.0);
    assert_eq!(report.columns[1].alpha, 0.6);
    assert!(report.columns.iter().all(|c| c.variance.all.unwrap() > 0.0));
    assert!(variance_protocol(&cfg, &data, 1, false).is_err());
}

#[test]
fn failing_member_is_named() {
    let mut cfg = small();
    cfg.scale = 1e308;
    let data = prepare_data(&cfg).unwrap();
    match variance_protocol(&cfg, &data, 2, false) {
        Err(e @ Error::Member { .. }) => {
            assert!(e.to_string().contains("member"));
            assert_eq!(e.exit_code(), 3);
        }
        other => panic!("expected a member failure, got {other:?}"),
    }
}

#[test]
fn sweep_shapes() {
    let mut cfg = small();
    cfg.epochs = 1;
    let t = lambda_sweep(&cfg, &[vec![0.0], vec![1.0]]).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.rows[0].lambdas, [0.0]);
    // Counts 60, 28, 13, 6: no class reaches the many-shot threshold.
    assert!(t.rows.iter().all(|r| r.accuracy.many.is_none() && r.accuracy.all.is_some()));
    let csv = t.to_csv();
    assert_eq!(csv.lines().next().unwrap(), "setting,lambdas,alpha,many,medium,few,all,sigma_all");
    assert_eq!(csv.lines().count(), 3);
    assert!(lambda_sweep(&cfg, &[vec![0.0]]).is_err());

    let t = expert_count_sweep(&cfg, &[1, 3]).unwrap();
    assert_eq!(t.rows[0].lambdas, [1.0]);
    assert_eq!(t.rows[1].lambdas, [-0.5, 1.0, 2.5]);

    let t = alpha_sweep(&cfg, &[0.0, 0.6]).unwrap();
    assert_eq!(t.rows.len(), 2);
    let mut dl_only = cfg.clone();
    dl_only.distill.alpha = 0.0;
    let (acc, div) = run_once(&dl_only).unwrap();
    assert_eq!(t.rows[0].accuracy, acc);
    assert_eq!(t.rows[0].diversity, div);
}

#[test]
fn triple_sweep_covers_reference_combinations() {
    let wanted: [[f64; 3]; 5] = [
        [0.0, 0.0, 0.0],
        [1.0, 1.0, 1.0],
        [2.0, 2.0, 2.0],
        [0.0, 1.0, 2.0],
        [-0.5, 1.0, 2.5],
    ];
    for w in wanted {
        assert!(TRIPLE_SWEEP.contains(&w));
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut cfg = small();
    cfg.repeats = 2;
    let data = prepare_data(&cfg).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            (
                variance_protocol(&cfg, &data, 3, true).unwrap().render(Format::Csv),
                alpha_sweep(&cfg, &[0.0, 0.6]).unwrap().to_csv(),
            )
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn file_backed_data() {
    let cfg = small();
    let data = prepare_data(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    data.train.save(dir.path().join("train.csv")).unwrap();
    data.test.save(dir.path().join("test.csv")).unwrap();
    let mut files = cfg.clone();
    files.data = DataSource::Files {
        train: dir.path().join("train.csv"),
        test: dir.path().join("test.csv"),
    };
    let again = prepare_data(&files).unwrap();
    assert_eq!(again.train, data.train);
    assert_eq!(again.split, data.split);
    let a = train(&cfg, &data.train).unwrap();
    let b = train(&files, &again.train).unwrap();
    assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
    let x = Array2::<f64>::zeros((1, 4));
    assert_eq!(a.model().predict(x.view()).unwrap(), b.model().predict(x.view()).unwrap());
}
