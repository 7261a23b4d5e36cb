use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CLEAN: &str = "llmsli grid=1m\n5 0 0\n0 0 3@90(TV_on_top)\n0 0 0\nsublayout TV:\n4\n";
const COLLIDING: &str = "llmsli grid=1m\n5[1.2x1.2x0.9] 5 0\n0 0 0\n";
const RING: &str = "llmslb grid=1m\nw w w\nw 0 w\nw d w\n";
const OPEN: &str = "llmslb grid=1m\nw w w\nw 0 0\nw w w\n";

fn sgc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgc"))
        .args(args)
        .current_dir(dir)
        .env_remove("SG_VOCAB")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [("clean.sg", CLEAN), ("colliding.sg", COLLIDING), ("ring.sgb", RING), ("open.sgb", OPEN)] {
        fs::write(dir.path().join(name), text).unwrap();
    }
    dir
}

#[test]
fn validate_clean_passes() {
    let dir = setup();
    let o = sgc(dir.path(), &["validate", "clean.sg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("passed"));
}

#[test]
fn validate_colliding_fails_with_message() {
    let dir = setup();
    let o = sgc(dir.path(), &["validate", "colliding.sg", "--report", "text"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("armchair_0 overlaps with armchair_1 at position (0,0)"), "{}", stdout(&o));

    let o = sgc(dir.path(), &["validate", "colliding.sg", "--report", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], false);
    assert_eq!(v["collisions"][0]["a_id"], "armchair_0");
}

#[test]
fn parse_errors_exit_two_with_a_caret() {
    let dir = setup();
    fs::write(dir.path().join("broken.sg"), "llmsli grid=1m\n5 0 3@9x\n").unwrap();
    let o = sgc(dir.path(), &["validate", "broken.sg"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("broken.sg:2:"), "{err}");
    assert!(err.contains('^'));
    assert_eq!(sgc(dir.path(), &["validate", "missing.sg"]).status.code(), Some(2));
    assert_eq!(sgc(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn compile_formats() {
    let dir = setup();
    let o = sgc(dir.path(), &["compile", "clean.sg"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["placements"].as_array().unwrap().len(), 3);
    assert_eq!(stdout(&o), stdout(&sgc(dir.path(), &["compile", "clean.sg"])));

    let o = sgc(dir.path(), &["compile", "clean.sg", "--out", "obj"]);
    assert!(stdout(&o).starts_with("# scene "));
    let o = sgc(dir.path(), &["compile", "clean.sg", "--out", "svg", "-o", "plan.svg"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(fs::read_to_string(dir.path().join("plan.svg")).unwrap().starts_with("<svg"));
    assert_eq!(sgc(dir.path(), &["compile", "clean.sg", "--out", "stl"]).status.code(), Some(2));
}

#[test]
fn layout_in_building() {
    let dir = setup();
    fs::write(dir.path().join("room.sg"), "llmsli grid=1m\n0 0 0\n0 5 0\n0 0 0\n").unwrap();
    let o = sgc(dir.path(), &["validate", "room.sg", "--building", "ring.sgb"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = sgc(dir.path(), &["compile", "room.sg", "--building", "ring.sgb"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["openings"][0]["kind"], "door");
}

#[test]
fn building_closure() {
    let dir = setup();
    let o = sgc(dir.path(), &["check-building", "ring.sgb"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("closed"));
    let o = sgc(dir.path(), &["check-building", "open.sgb"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("is not closed"), "{}", stdout(&o));
}

#[test]
fn gen_data_is_reproducible() {
    let dir = setup();
    let run = |out: &str, extra: &[&str]| {
        let mut args = vec!["gen-data", "--template", "living_room", "--n", "10", "--seed", "7", "--out-dir", out];
        args.extend_from_slice(extra);
        let o = sgc(dir.path(), &args);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("a", &[]);
    run("b", &[]);
    run("c", &["--serial"]);
    for file in ["sft.jsonl", "pretrain.jsonl", "dpo.jsonl"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(file)).unwrap(), "{file}");
        assert_eq!(a, fs::read(dir.path().join("c").join(file)).unwrap(), "{file}");
    }
    let sft = fs::read_to_string(dir.path().join("a/sft.jsonl")).unwrap();
    assert_eq!(sft.lines().count(), 10);
    let pre = fs::read_to_string(dir.path().join("a/pretrain.jsonl")).unwrap();
    assert_eq!(pre.lines().count(), 30);

    let o = sgc(dir.path(), &["gen-data", "--template", "office", "--n", "2", "--stage", "sft"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2);
    let o = sgc(dir.path(), &["gen-data", "--template", "garage", "--n", "2", "--stage", "sft"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_single_and_cumulative() {
    let dir = setup();
    let turn1 = r#"{"checks":[{"id":"stand","kind":"exist","subject":"tv_stand"},{"kind":"hierarchy_support","subject":"tv","object":"tv_stand"}]}"#;
    let turn2 = r#"{"turn":2,"checks":[{"kind":"exist","subject":"armchair"},{"kind":"exist","subject":"bed"}]}"#;
    fs::write(dir.path().join("t1.json"), turn1).unwrap();
    fs::write(dir.path().join("both.json"), format!("[{turn1},{turn2}]")).unwrap();

    let o = sgc(dir.path(), &["eval", "--scene", "clean.sg", "--checklist", "t1.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["ratio"], 1.0);

    let json = stdout(&sgc(dir.path(), &["compile", "clean.sg"]));
    fs::write(dir.path().join("clean.json"), json).unwrap();
    let o = sgc(dir.path(), &["eval", "--scene", "clean.json", "--scene", "clean.sg", "--checklist", "both.json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[1]["total"], 4);
    assert_eq!(v[1]["ratio"], 0.75);

    let o = sgc(dir.path(), &["eval", "--scene", "clean.sg", "--checklist", "both.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn vocab_from_env_and_config() {
    let dir = setup();
    fs::write(dir.path().join("mini.vocab"), "7 crate floor_furniture 0.5 0.5 0.5\n").unwrap();
    fs::write(dir.path().join("crate.sg"), "llmsli grid=1m\n7 0\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sgc"))
        .args(["compile", "crate.sg"])
        .current_dir(dir.path())
        .env("SG_VOCAB", "mini.vocab")
        .output()
        .unwrap();
    assert!(stdout(&o).contains("\"crate_0\""), "{}", String::from_utf8_lossy(&o.stderr));

    fs::write(dir.path().join("sgc.toml"), "vocab = \"mini.vocab\"\n").unwrap();
    let o = sgc(dir.path(), &["--config", "sgc.toml", "compile", "crate.sg"]);
    assert!(stdout(&o).contains("\"crate_0\""));
    // builtin code 7 is a wardrobe
    assert!(stdout(&sgc(dir.path(), &["compile", "crate.sg"])).contains("wardrobe_0"));
}

#[test]
fn stats_for_both_languages() {
    let dir = setup();
    let v: serde_json::Value = serde_json::from_slice(&sgc(dir.path(), &["stats", "clean.sg"]).stdout).unwrap();
    assert_eq!(v["max_depth"], 1);
    let v: serde_json::Value = serde_json::from_slice(&sgc(dir.path(), &["stats", "ring.sgb"]).stdout).unwrap();
    assert_eq!(v["doors"], 1);
    assert_eq!(v["open_structures"], 0);
}
