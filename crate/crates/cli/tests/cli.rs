use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn nbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbf")).args(args).output().expect("run nbf")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(name: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("nbf-cli-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        TempDir(dir)
    }

    fn path(&self, file: &str) -> String {
        self.0.join(file).display().to_string()
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

#[test]
fn de_threshold_binary() {
    let o = nbf(&["de-threshold", "--m", "1", "--dc", "3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("m,dc,epsilon_star"));
    let row = lines.next().unwrap();
    let eps: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!(row.starts_with("1,3,"));
    assert!((eps - 1.0799).abs() < 5e-4);
}

#[test]
fn de_table_shape() {
    let o = nbf(&["de-table", "--m-max", "2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 1 + 2 * 4);
    assert_eq!(rows[1].split(',').take(2).collect::<Vec<_>>(), ["1", "3"]);
    assert_eq!(rows[8].split(',').take(2).collect::<Vec<_>>(), ["2", "6"]);
}

fn round_trip(dir: &TempDir, extra_encode: &[&str], extra_decode: &[&str], n: &str) {
    let code = dir.path("code.txt");
    let packets = dir.path("packets.csv");
    let info = dir.path("info.txt");
    let decoded = dir.path("decoded.txt");
    let mut args = vec!["encode", "--m", "4", "--k", "96", "--n", n, "--dump-code", &code, "--info-out", &info, "-o", &packets];
    args.extend_from_slice(extra_encode);
    let o = nbf(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&packets).unwrap();
    assert!(csv.starts_with("i,v,w,h_hex,y\n"));
    assert_eq!(csv.lines().count(), 1 + n.parse::<usize>().unwrap());

    let mut args = vec!["decode", "--load-code", &code, "--packets", &packets, "-o", &decoded];
    args.extend_from_slice(extra_decode);
    let o = nbf(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&decoded).unwrap(), fs::read_to_string(&info).unwrap());
}

#[test]
fn encode_decode_noiseless() {
    let dir = TempDir::new("noiseless");
    round_trip(&dir, &[], &[], "200");
}

#[test]
fn encode_decode_erasures() {
    let dir = TempDir::new("bec");
    round_trip(&dir, &["--erasure", "0.3"], &["--erasure", "0.3"], "400");
    let csv = fs::read_to_string(dir.path("packets.csv")).unwrap();
    assert!(csv.lines().any(|l| l.ends_with(",e")));
}

#[test]
fn encode_decode_awgn() {
    let dir = TempDir::new("awgn");
    let flags = ["--channel", "biawgn", "--capacity", "0.5"];
    round_trip(&dir, &flags, &flags, "800");
}

#[test]
fn encode_decode_custom_polynomial() {
    let dir = TempDir::new("poly");
    round_trip(&dir, &["--field-poly", "0x19"], &["--field-poly", "0x19"], "200");
}

#[test]
fn decode_with_too_few_packets_fails() {
    let dir = TempDir::new("few");
    let code = dir.path("code.txt");
    let packets = dir.path("packets.csv");
    assert!(nbf(&["encode", "--m", "4", "--k", "96", "--n", "20", "--dump-code", &code, "-o", &packets]).status.success());
    let o = nbf(&["decode", "--load-code", &code, "--packets", &packets]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn load_code_reencodes_identically() {
    let dir = TempDir::new("load");
    let code = dir.path("code.txt");
    let a = nbf(&["encode", "--m", "4", "--k", "96", "--n", "50", "--dump-code", &code]);
    let b = nbf(&["encode", "--load-code", &code, "--n", "50"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn histogram_output() {
    let o = nbf(&["histogram", "--k", "64,128", "--trials", "3", "--m", "4", "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let body: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "k,trial,epsilon,attempts,censored,undetected");
    assert_eq!(body.len(), 7);
    assert_eq!(out.lines().filter(|l| l.starts_with("# summary")).count(), 2);
    let again = nbf(&["histogram", "--k", "64,128", "--trials", "3", "--m", "4", "--seed", "5"]);
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with('#')).map(String::from).collect::<Vec<_>>();
    assert_eq!(strip(&out), strip(&stdout(&again)));
}

#[test]
fn bler_output() {
    let o = nbf(&["bler", "--k", "64", "--m", "4", "--capacity", "1.0,0.5", "--eps-grid", "0,1", "--trials", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "C,epsilon,trials,block_errors,undetected");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("1,0.0000,4,"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let cases: [&[&str]; 7] = [
        &["de-threshold", "--m", "1", "--dc", "7"],
        &["de-threshold", "--m", "20", "--dc", "3"],
        &["histogram", "--k", "100", "--trials", "1"],
        &["histogram", "--k", "64", "--m", "4", "--channel", "biawgn"],
        &["encode", "--m", "4", "--k", "96", "--n", "5", "--field-poly", "0x1f"],
        &["bler", "--k", "64", "--m", "4", "--eps-grid", "0:1:0"],
        &["no-such-command"],
    ];
    for args in cases {
        assert_eq!(nbf(args).status.code(), Some(2), "{args:?}");
    }
}
