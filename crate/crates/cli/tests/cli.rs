use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgeshare"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn records(csv_text: &str) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let header = r.headers().unwrap().clone();
    let rows = r.records().map(|x| x.unwrap()).collect();
    (header, rows)
}

fn col(header: &csv::StringRecord, name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "gamma=1\nflavour=mint\n").unwrap();
    assert_eq!(run(&["simulate", "--tuple", "scheme=2,e=5,p=3,n=5", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--tuple", "scheme=7,e=5"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--tuple", "scheme=2,e=5,p=3,n=5", "--set", "mu=3"]).status.code(), Some(2));
    assert_eq!(run(&["optimize", "--scheme", "2", "--z", "9", "--trials", "10"]).status.code(), Some(3));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--tuple", "scheme=2,e=5,p=3,n=5", "--trials", "20"]).status.code(), Some(0));
}

#[test]
fn sweep_has_one_row_per_gamma_and_z_and_orders_privacy_levels() {
    let o = run(&["sweep", "--scheme", "1", "--z", "1,2,3,4", "--gamma-grid", "0:5:0.5", "--trials", "400"]);
    let (h, rows) = records(&stdout(&o));
    assert_eq!(rows.len(), 44);
    let (mean, se, z) = (col(&h, "mean_latency"), col(&h, "stderr"), col(&h, "z"));
    for g in rows.chunks(4) {
        for w in g.windows(2) {
            assert_eq!(w[1][z].parse::<usize>().unwrap(), w[0][z].parse::<usize>().unwrap() + 1);
            let (a, b): (f64, f64) = (w[0][mean].parse().unwrap(), w[1][mean].parse().unwrap());
            let s: f64 = w[1][se].parse().unwrap();
            assert!(a <= b + 2.0 * s, "{a} vs {b}");
        }
    }
}

#[test]
fn echoed_config_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--scheme", "2", "--gamma-grid", "0.5,2", "--trials", "300", "--set", "e_max=6", "--set", "mu=1/2", "--seed", "17"];
    let first = run(&args);
    let out1 = stdout(&first);
    let echo = dir.path().join("echo.cfg");
    std::fs::write(&echo, &first.stderr).unwrap();
    let second = run(&["sweep", "--scheme", "2", "--gamma-grid", "0.5,2", "--trials", "300", "--config", echo.to_str().unwrap()]);
    assert_eq!(stdout(&second), out1);
}

#[test]
fn deadline_output_is_a_ccdf_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let args = [
        "deadline", "--scheme", "2", "--z", "1", "--gamma-grid", "1", "--deadline-grid", "1000:9000:2000",
        "--trials", "10000", "--set", "e_max=5", "--out", out.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    let a = std::fs::read(&out).unwrap();
    assert!(run(&args).status.success());
    assert_eq!(std::fs::read(&out).unwrap(), a);
    let (h, rows) = records(std::str::from_utf8(&a).unwrap());
    assert_eq!(rows.len(), 5);
    let p = col(&h, "exceedance_probability");
    let probs: Vec<f64> = rows.iter().map(|r| r[p].parse().unwrap()).collect();
    assert!(probs.windows(2).all(|w| w[1] <= w[0]), "{probs:?}");
    assert!(probs[0] > 0.0);
    // Too few trials is a config error.
    assert_eq!(run(&["deadline", "--scheme", "2", "--trials", "100"]).status.code(), Some(2));
}

#[test]
fn optimize_table_parses_back_and_holds_every_candidate() {
    let o = run(&["optimize", "--scheme", "1", "--z", "2", "--trials", "200", "--set", "e_max=6"]);
    let (h, rows) = records(&stdout(&o));
    let names: Vec<&str> = h.iter().collect();
    assert_eq!(
        names,
        ["scheme", "e", "p", "n", "k", "n_prime", "k_prime", "t", "z", "mean", "stderr", "trials", "exceedance"]
    );
    assert!(!rows.is_empty());
    for r in &rows {
        assert_eq!(&r[0], "1");
        assert!(r[7].parse::<usize>().unwrap() >= r[4].parse::<usize>().unwrap());
        assert_eq!(&r[11], "200");
    }
    assert!(String::from_utf8_lossy(&o.stderr).contains("best: scheme 1"));
}

#[test]
fn trace_shows_upload_slots_and_idle_channel() {
    // e = n = 9, p = 6: every node gets a = 2 shares; its h'-th share
    // arrives at γ r (9(h'-1) + j).
    let o = run(&["trace", "--tuple", "scheme=2,e=9,p=6,n=9", "--set", "gamma=0.2"]);
    let text = stdout(&o);
    let uploads: Vec<f64> = text
        .lines()
        .filter(|l| l.contains("upload share"))
        .map(|l| l.split_whitespace().next().unwrap().parse().unwrap())
        .collect();
    let expect: Vec<f64> = (1..=2)
        .flat_map(|h| (1..=9).map(move |j| 0.2 * 50.0 * (9 * (h - 1) + j) as f64))
        .collect();
    assert_eq!(uploads, expect);
    assert!(text.contains("channel idle, queue empty"));
    assert!(text.lines().last().unwrap().contains("total"));
}

#[test]
fn simulate_baseline_and_private_rows() {
    let (_, rows) = records(&stdout(&run(&["simulate", "--tuple", "scheme=baseline,e=9", "--trials", "50"])));
    assert_eq!(&rows[0][0], "baseline");
    let (h, rows) = records(&stdout(&run(&["simulate", "--tuple", "scheme=3,e=9,p=2,n=3,n_prime=3,k_prime=3", "--trials", "50"])));
    assert_eq!(&rows[0][col(&h, "k")], "3");
    assert!(rows[0][col(&h, "mean")].parse::<f64>().unwrap() > 0.0);
}
