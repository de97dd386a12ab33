use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use pagas::io::read_ply;

fn pagas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pagas")).args(args).output().unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(root: &Path, scene: &str, extra: &[&str]) -> PathBuf {
    let ds = root.join("ds");
    let dir = s(&ds);
    let mut args = vec!["synth", "--scene", scene, "--out", &dir, "--size", "32x32", "--views", "3"];
    args.extend_from_slice(extra);
    let o = pagas(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    ds
}

fn refine(ds: &Path, out: &Path, extra: &[&str]) -> Output {
    let (i, d, c, o) = (s(&ds.join("images")), s(&ds.join("depths")), s(&ds.join("sparse")), s(out));
    let mut args = vec!["refine", "--images", &i, "--depths", &d, "--cameras", &c, "--out", &o, "--iters", "5,5"];
    args.extend_from_slice(extra);
    pagas(&args)
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

#[test]
fn synth_then_refine_writes_depths_normals_and_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "sphere-noise", &[]);
    let out = tmp.path().join("out");
    let o = refine(&ds, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files(&out.join("depths")), ["view000.pfm", "view001.pfm", "view002.pfm"]);
    assert_eq!(files(&out.join("normals")), ["view000.png", "view001.png", "view002.png"]);
    assert!(out.join("config.toml").is_file());
    let log = std::fs::read_to_string(out.join("logs").join("view000.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert!(first["loss_c"].is_number() && first["lr"].as_f64() == Some(1e-5));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("logs").join("summary.json")).unwrap()).unwrap();
    assert!(summary.is_object());
}

#[test]
fn view_subset_and_overrides_are_respected() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "plane-checker", &[]);
    let out = tmp.path().join("out");
    let o = refine(&ds, &out, &["--views", "view001", "--set", "lambda_s=0.3", "--preset", "generic"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files(&out.join("depths")), ["view001.pfm"]);
    let cfg: toml::Table = std::fs::read_to_string(out.join("config.toml")).unwrap().parse().unwrap();
    assert_eq!(cfg["lambda_s"].as_float(), Some(0.3));
    assert_eq!(cfg["pyramid_iters"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_override_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "plane-checker", &[]);
    let o = refine(&ds, &tmp.path().join("out"), &["--set", "no_such_field=1"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn missing_depth_fails_naming_the_view() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "plane-checker", &[]);
    std::fs::remove_file(ds.join("depths").join("view002.pfm")).unwrap();
    let o = refine(&ds, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("view002"), "{}", stderr(&o));
}

#[test]
fn fusing_exact_plane_depths_gives_a_flat_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "plane-checker", &["--noise", "0"]);
    let ply = tmp.path().join("mesh.ply");
    let o = pagas(&["fuse", "--depths", &s(&ds.join("depths")), "--cameras", &s(&ds.join("sparse")), "--out", &s(&ply), "--voxel", "0.02"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mesh = read_ply(&ply).unwrap();
    assert!(!mesh.is_empty());
    let n = mesh.face_normal(0);
    let p0 = mesh.vertices[0];
    let off = mesh.vertices.iter().map(|v| (*v - p0).dot(n).abs()).fold(0.0, f64::max);
    assert!(off < 0.02, "max distance from the plane {off}");
}

#[test]
fn voxel_larger_than_the_scene_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "sphere-noise", &[]);
    let ply = tmp.path().join("mesh.ply");
    let o = pagas(&["fuse", "--depths", &s(&ds.join("depths")), "--cameras", &s(&ds.join("sparse")), "--out", &s(&ply), "--voxel", "100"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("voxel"), "{}", stderr(&o));
}

#[test]
fn render_normals_writes_one_png_per_depth() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "sphere-noise", &[]);
    let out = tmp.path().join("normals");
    let o = pagas(&["render-normals", "--depths", &s(&ds.join("depths")), "--cameras", &s(&ds.join("sparse")), "--out", &s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files(&out).len(), 3);
}

#[test]
fn gradient_check_passes_quickly_and_catches_a_sign_flip() {
    let t = Instant::now();
    let o = pagas(&["check-gradients", "--seed", "1", "--size", "4x4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(t.elapsed().as_secs_f64() < 5.0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    let o = pagas(&["check-gradients", "--seed", "1", "--size", "8x8", "--inject-sign-flip"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn refine_help_lists_every_config_field_with_its_default() {
    let o = pagas(&["refine", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    let table: toml::Table = pagas::RefineConfig::default().to_toml().parse().unwrap();
    for (key, value) in &table {
        let line = text.lines().find(|l| l.trim_start().starts_with(key.as_str())).unwrap_or_else(|| panic!("{key} missing"));
        assert!(line.contains(&value.to_string()), "{line}");
    }
}

#[test]
fn missing_arguments_are_usage_errors() {
    assert_eq!(pagas(&["refine"]).status.code(), Some(1));
    assert_eq!(pagas(&["fuse", "--voxel", "abc"]).status.code(), Some(1));
}
