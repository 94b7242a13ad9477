use criterion::{black_box, criterion_group, criterion_main, Criterion};
use edgeshare::assignment::AssignmentPlan;
use edgeshare::baseline::{baseline_total_latency, BaselineConfig};
use edgeshare::field::{Fe, Field};
use edgeshare::latency::{scheme1_totals_all_t, trial_setup, SystemConfig};
use edgeshare::rs::RsCode;
use edgeshare::sim::QueueSimulator;
use edgeshare::sss::{peel_pattern, PeelPattern};

fn per_trial(c: &mut Criterion) {
    let cfg = SystemConfig::default();
    let setups: Vec<_> = (0..64).map(|t| trial_setup(cfg.seed, t, 9, cfg.eta)).collect();
    let plan = AssignmentPlan::uncoded(9, 6, 8).unwrap();
    let mut i = 0;
    c.bench_function("stop_then_download_all_t", |b| {
        b.iter(|| {
            i = (i + 1) % setups.len();
            scheme1_totals_all_t(&plan, &cfg, &setups[i], 3, 12).unwrap()
        })
    });
    let mut sim = QueueSimulator::uncoded(&plan, 3, &cfg).unwrap();
    c.bench_function("queue_trial", |b| {
        b.iter(|| {
            i = (i + 1) % setups.len();
            sim.total(&setups[i]).unwrap()
        })
    });
    let coded = AssignmentPlan::coded(9, 2, 7, 4).unwrap();
    let mut sim3 = QueueSimulator::coded(&coded, 5, 3, &cfg).unwrap();
    c.bench_function("coded_queue_trial", |b| {
        b.iter(|| {
            i = (i + 1) % setups.len();
            sim3.total(&setups[i]).unwrap()
        })
    });
    let base = BaselineConfig::for_system(&cfg, 9);
    c.bench_function("baseline_trial", |b| {
        b.iter(|| {
            i = (i + 1) % setups.len();
            baseline_total_latency(&base, &cfg, &setups[i]).unwrap().total
        })
    });
}

fn coding(c: &mut Criterion) {
    let cells: Vec<(usize, usize)> = (0..13).flat_map(|l| (0..13).map(move |h| (l, h))).filter(|(l, h)| (l * 7 + h * 3) % 5 < 3).collect();
    let pattern = PeelPattern::from_cells(13, 13, &cells);
    c.bench_function("peel_13x13", |b| b.iter(|| peel_pattern(black_box(&pattern), 6, 6)));

    let f = Field::new(65_537).unwrap();
    let code = RsCode::new(&f, 9, 5).unwrap();
    let word = code.encode(&[f.elem(3), f.elem(1), f.elem(4), f.elem(1), f.elem(5)]).unwrap();
    let avail: Vec<(usize, Fe)> = [0, 2, 3, 6, 8].iter().map(|&p| (p, word[p])).collect();
    c.bench_function("rs_decode_9_5", |b| b.iter(|| code.decode_erasures(black_box(&avail)).unwrap()));
}

criterion_group!(benches, per_trial, coding);
criterion_main!(benches);
