use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn xor3(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xor3"))
        .args(args)
        .env_remove("XOR3_SEED")
        .output()
        .expect("spawn xor3")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/golden")
            .join(name),
    )
    .unwrap()
}

fn gen(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.path().join(name);
    let mut all = args.to_vec();
    all.extend(["--out", path.to_str().unwrap()]);
    let o = xor3(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

/// Hex triple from a `SOLUTION a b c` line, checked for a ⊕ b = c and
/// membership.
fn check_solution(line: &str, words: &[u64]) {
    let parts: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(parts[0], "SOLUTION", "{line}");
    let v: Vec<u64> = parts[1..]
        .iter()
        .map(|h| u64::from_str_radix(h, 16).unwrap())
        .collect();
    assert_eq!(v[0] ^ v[1], v[2]);
    assert!(v.iter().all(|x| words.contains(x)));
}

fn words_of(path: &Path) -> Vec<u64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| u64::from_str_radix(l, 16).unwrap())
        .collect()
}

#[test]
fn five_keys_files_match_golden() {
    let dir = TempDir::new().unwrap();
    let f = gen(
        &dir,
        "five_keys.txt",
        &["--w", "4", "gen", "--from-list", "f,1,a,3,2"],
    );
    assert_eq!(std::fs::read_to_string(&f).unwrap(), golden("five_keys.txt"));
    let o = xor3(&["dump-tree", f.to_str().unwrap()]);
    assert_eq!(stdout(&o), golden("five_keys_tree.txt"));
    for algo in [
        "brute",
        "trie",
        "rand",
        "via-disjointness",
        "via-intersection",
    ] {
        let o = xor3(&["solve", f.to_str().unwrap(), "--algo", algo]);
        assert!(o.status.success());
        check_solution(stdout(&o).trim(), &[1, 2, 3, 10, 15]);
    }
}

#[test]
fn duplicate_list_entries_are_rejected() {
    let o = xor3(&["--w", "4", "gen", "--from-list", "1,2,1"]);
    assert!(!o.status.success());
    let o = xor3(&["--w", "4", "gen", "--n", "4", "--from-list", "1,2,3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solution_free_gives_none_everywhere() {
    let dir = TempDir::new().unwrap();
    let f = gen(
        &dir,
        "free.txt",
        &[
            "--w",
            "32",
            "--seed",
            "3",
            "gen",
            "--n",
            "64",
            "--mode",
            "solution-free",
        ],
    );
    for algo in [
        "brute",
        "trie",
        "rand",
        "via-disjointness",
        "via-intersection",
    ] {
        let o = xor3(&["solve", f.to_str().unwrap(), "--algo", algo]);
        assert_eq!(stdout(&o), "NONE\n", "{algo}");
        assert_eq!(o.status.code(), Some(0));
    }
}

#[test]
fn brute_and_rand_agree_on_a_sweep() {
    let dir = TempDir::new().unwrap();
    for seed in 0..12 {
        let mode = if seed % 2 == 0 { "planted" } else { "random" };
        let s = seed.to_string();
        let f = gen(
            &dir,
            "x.txt",
            &[
                "--w", "16", "--seed", &s, "gen", "--n", "40", "--mode", mode,
            ],
        );
        let words = words_of(&f);
        let brute = stdout(&xor3(&["solve", f.to_str().unwrap(), "--algo", "brute"]));
        for regime in ["auto", "long", "short"] {
            let rand = stdout(&xor3(&[
                "--seed",
                &s,
                "solve",
                f.to_str().unwrap(),
                "--algo",
                "rand",
                "--regime",
                regime,
            ]));
            assert_eq!(rand == "NONE\n", brute == "NONE\n", "seed {seed} {regime}");
            if rand != "NONE\n" {
                check_solution(rand.trim(), &words);
            }
        }
    }
}

#[test]
fn emit_stats_has_the_documented_keys() {
    let dir = TempDir::new().unwrap();
    let f = gen(
        &dir,
        "p.txt",
        &["--w", "32", "gen", "--n", "100", "--mode", "planted"],
    );
    let o = xor3(&[
        "solve",
        f.to_str().unwrap(),
        "--algo",
        "rand",
        "--regime",
        "long",
        "--emit-stats",
    ]);
    let out = stdout(&o);
    let mut lines = out.lines();
    check_solution(lines.next().unwrap(), &words_of(&f));
    let v: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        [
            "R",
            "bound",
            "colliding_triples_seen",
            "p",
            "regime",
            "retries"
        ]
    );
    assert_eq!(v["regime"], "long_word");
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let a = gen(&dir, "a.txt", &["--seed", "77", "gen", "--n", "20"]);
    let b = dir.path().join("b.txt");
    let o = Command::new(env!("CARGO_BIN_EXE_xor3"))
        .args(["gen", "--n", "20", "--out", b.to_str().unwrap()])
        .env("XOR3_SEED", "77")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn bench_csv_header_matches_golden() {
    let o = xor3(&[
        "--w", "32", "bench", "--lo", "4", "--hi", "6", "--reps", "1",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    let header: String = out.lines().take(2).map(|l| format!("{l}\n")).collect();
    assert_eq!(header, golden("bench_header.csv"));
    let rows: Vec<&str> = out.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("trie,16,32,256,0,1,"));
}

#[test]
fn bench_is_deterministic_apart_from_timing() {
    let strip = |s: String| -> Vec<String> {
        s.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                if f.len() > 6 {
                    f[6] = "";
                }
                f.join(",")
            })
            .collect()
    };
    let args = [
        "--w", "32", "--seed", "9", "bench", "--algo", "rand", "--lo", "5", "--hi", "6", "--reps",
        "1",
    ];
    assert_eq!(strip(stdout(&xor3(&args))), strip(stdout(&xor3(&args))));
}

#[test]
fn stats_hashing_csv() {
    let o = xor3(&[
        "stats", "hashing", "--n", "256", "--m", "4,16", "--trials", "5",
    ]);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "n,m,trials,mean_overfull,bound_m");
    assert!(lines[1].starts_with("256,4,5,"));
    assert!(lines[2].ends_with(",16"));
}

#[test]
fn reduce_writes_the_offline_instance() {
    let dir = TempDir::new().unwrap();
    let f = gen(&dir, "r.txt", &["--w", "32", "gen", "--n", "16"]);
    let out = dir.path().join("red.json");
    let o = xor3(&[
        "reduce",
        f.to_str().unwrap(),
        "--target",
        "disjointness",
        "--gamma",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let queries = v["queries"].as_array().unwrap();
    assert_eq!(queries.len(), 256);
    assert_eq!(queries[5].as_array().unwrap().len(), 3);
    for fam in ["family_a", "family_b"] {
        for set in v[fam].as_array().unwrap() {
            let xs: Vec<u64> = set
                .as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_u64().unwrap())
                .collect();
            assert!(xs.windows(2).all(|p| p[0] < p[1]));
            assert!(xs.iter().all(|&x| x < v["universe_size"].as_u64().unwrap()));
        }
    }
    let o = xor3(&[
        "reduce",
        f.to_str().unwrap(),
        "--target",
        "disjointness",
        "--gamma",
        "1.5",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(xor3(&["solve"]).status.code(), Some(2));
    assert_eq!(
        xor3(&["--format", "csv", "gen", "--n", "4"]).status.code(),
        Some(2)
    );
    assert_eq!(xor3(&["gen"]).status.code(), Some(2));
    assert_eq!(
        xor3(&["bench", "--lo", "9", "--hi", "3"]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_passes_and_catches_faults() {
    let o = xor3(&["verify", "--quick", "--trials", "8", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["disagreements"].as_array().unwrap().len(), 0);

    let o = xor3(&[
        "verify",
        "--quick",
        "--trials",
        "8",
        "--inject-fault",
        "--seed",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--seed 4"), "{err}");
}

#[test]
fn distinct_flag_excludes_zero_triples() {
    let dir = TempDir::new().unwrap();
    let f = gen(&dir, "z.txt", &["--w", "8", "gen", "--from-list", "0,5,9"]);
    assert!(stdout(&xor3(&["solve", f.to_str().unwrap()])).starts_with("SOLUTION"));
    assert_eq!(
        stdout(&xor3(&["--distinct", "solve", f.to_str().unwrap()])),
        "NONE\n"
    );
}
