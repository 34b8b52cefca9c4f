//! With alpha = 0 the domain term must not influence training at all.

use sleepcast::data::{generate_synthetic, preprocess, SubjectId, SyntheticConfig, DEFAULT_DROP_FEATURES};
use sleepcast::experiment::{loso_folds, objective, prepare_fold, train, DomainIndex, TrainConfig};
use sleepcast::model::{Dims, HyperParams, Model, ModelKind};
use sleepcast::window::{Batch, WindowConfig};
use sleepcast_kernel::{ForwardCtx, HasParams, Rng, Tape};

fn setup() -> (
    Vec<sleepcast::window::WindowedInstance>,
    Vec<sleepcast::window::WindowedInstance>,
    DomainIndex,
    Dims,
) {
    let cfg = SyntheticConfig {
        n_subjects: 4,
        n_days: 40,
        ..Default::default()
    };
    let data = preprocess(&generate_synthetic(&cfg, 11).unwrap(), &DEFAULT_DROP_FEATURES)
        .unwrap()
        .datasets;
    let ids: Vec<SubjectId> = data.iter().map(|d| d.subject).collect();
    let fold = &loso_folds(&ids).unwrap()[0];
    let fd = prepare_fold(&data, fold, &WindowConfig::new(5, 2).unwrap()).unwrap();
    let dims = Dims {
        features: fd.normalizer.feature_names.len(),
        window: 5,
        horizon: 2,
        domains: ids.len(),
    };
    (fd.train, fd.val, DomainIndex::new(&ids), dims)
}

fn hp() -> HyperParams {
    HyperParams {
        alpha: 0.0,
        cnn_hidden_size: 8,
        lstm_hidden_size: 8,
        batch_size: 16,
        use_batchnorm: true,
        ..HyperParams::default()
    }
}

#[test]
fn zero_alpha_step_has_no_domain_gradient() {
    let (train_set, _, domains, dims) = setup();
    let mut model = Model::new(ModelKind::AdaSt, &hp(), dims, &mut Rng::new(1)).unwrap();
    let batch = Batch::from_instances(&train_set[..16].iter().collect::<Vec<_>>()).unwrap();
    let labels = domains.labels(&batch.domains).unwrap();

    let run = |model: &mut Model, labels: Option<&[usize]>| {
        let mut tape = Tape::new();
        let x = tape.constant(batch.x.clone());
        let mut rng = Rng::new(3);
        let out = model.forward(&mut tape, &mut ForwardCtx::train(&mut rng), x, true).unwrap();
        let obj = objective(&mut tape, &out, &batch.y, labels, 0.0).unwrap();
        let (main, total) = (tape.value(obj.main).item(), tape.value(obj.total).item());
        model.store_mut().zero_grad();
        tape.backward_into(obj.total, model.store_mut()).unwrap();
        let g: Vec<(String, Vec<f64>)> = model
            .store()
            .params()
            .iter()
            .map(|p| (p.name.clone(), p.grad.data().to_vec()))
            .collect();
        (main, total, g)
    };
    let (main, total, with_dom) = run(&mut model, Some(&labels));
    assert_eq!(main.to_bits(), total.to_bits());
    let (_, _, without) = run(&mut model, None);
    for ((name, g), (_, g0)) in with_dom.iter().zip(&without) {
        if name.starts_with("domain_head") {
            assert!(g.iter().all(|v| *v == 0.0), "{name} has a nonzero gradient");
        } else {
            assert_eq!(g, g0, "{name}");
        }
    }
}

#[test]
fn zero_alpha_trajectory_matches_main_only_training() {
    let (train_set, val_set, domains, dims) = setup();
    let cfg = TrainConfig {
        epochs: 4,
        alpha: 0.0,
        batch_size: 16,
        seed: 5,
        record_steps: true,
        ..Default::default()
    };
    let mut with_dom = Model::new(ModelKind::AdaSt, &hp(), dims, &mut Rng::new(2)).unwrap();
    let mut main_only = with_dom.clone();
    let a = train(&mut with_dom, &train_set, &val_set, &domains, &cfg).unwrap();
    let b = train(
        &mut main_only,
        &train_set,
        &val_set,
        &domains,
        &TrainConfig {
            domain_loss: false,
            ..cfg.clone()
        },
    )
    .unwrap();

    assert!(!a.steps.is_empty());
    for s in &a.steps {
        assert!(s.dom.is_some());
        assert_eq!(s.total.to_bits(), s.main.to_bits(), "epoch {} batch {}", s.epoch, s.batch);
    }
    let mains = |o: &sleepcast::experiment::TrainOutcome| o.steps.iter().map(|s| s.main.to_bits()).collect::<Vec<_>>();
    assert_eq!(mains(&a), mains(&b));
    for (p, q) in with_dom.store().params().iter().zip(main_only.store().params()) {
        if !p.name.starts_with("domain_head") {
            assert_eq!(p.value, q.value, "{}", p.name);
        }
    }
}
