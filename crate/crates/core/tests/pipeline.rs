use hyperfront::hypernet::ArchKind;
use hyperfront::problems::ProblemId;
use hyperfront::train::presets::preset_config;
use hyperfront::train::{evaluate_run, load_checkpoint, save_checkpoint, train, EvalOptions};

#[test]
fn trained_checkpoint_survives_a_round_trip() {
    let mut config = preset_config(ProblemId::Zdt1, ArchKind::Trans, 7);
    config.iterations = 300;
    config.arch.d = 8;
    let ck = train(&config, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    save_checkpoint(&ck, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    let problem = config.problem();
    for c in 0..ck.components() {
        for r in [[0.2, 0.8], [0.5, 0.5], [0.9, 0.1]] {
            let p = ck.infer(&problem, c, &r, None, None).unwrap();
            let q = back.infer(&problem, c, &r, None, None).unwrap();
            assert_eq!(p.x, q.x);
            assert_eq!(p.f, q.f);
        }
    }
    let opts = EvalOptions::new(2, vec![0, 1]);
    let mut a = evaluate_run(&ck, &opts).unwrap();
    let mut b = evaluate_run(&back, &opts).unwrap();
    a.runtime_s = 0.0;
    b.runtime_s = 0.0;
    assert_eq!(a, b);
}

#[test]
fn training_beats_the_untrained_network() {
    let mut config = preset_config(ProblemId::Cvx1, ArchKind::Trans, 0);
    config.arch.d = 8;
    config.iterations = 1;
    let opts = EvalOptions::new(3, vec![0, 1, 2]);
    let before = evaluate_run(&train(&config, None).unwrap(), &opts).unwrap().med_mean;
    config.iterations = 3000;
    let after = evaluate_run(&train(&config, None).unwrap(), &opts).unwrap().med_mean;
    assert!(after < 0.5 * before, "MED {before} -> {after}");
}

#[test]
fn moe_experts_cover_every_anchor() {
    let mut config = preset_config(ProblemId::Zdt3, ArchKind::TransMoe, 1);
    config.iterations = 200;
    config.arch.d = 8;
    let ck = train(&config, None).unwrap();
    assert_eq!(ck.components(), 5);
    let problem = config.problem();
    for c in 0..5 {
        let inf = ck.infer(&problem, c, &[0.5, 0.5], None, None).unwrap();
        assert_eq!(inf.expert_id, Some(c));
        assert_eq!(inf.a, config.anchors[c].a);
    }
}
