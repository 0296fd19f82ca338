//! Acceptance criteria, one verdict line each. Runs as a plain binary
//! (`harness = false`) and exits nonzero when any criterion fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use num::BigRational;
use serde_json::Value;

use sdrs_core::analysis::{analyze, build_view};
use sdrs_core::model::{Mode, ViolationKind};
use sdrs_core::stats::{binomial_upper_tail_exact, chi2_sf_df1};
use sdrs_core::transcript::TranscriptDocument;
use sdrs_testkit::{
    binomial_tail_by_enumeration, brute_force_frontier, chi2_df1_tail_by_quadrature,
    random_attachment_run, random_transcript, rng,
};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn sdrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdrs"))
        .args(args)
        .output()
        .expect("sdrs binary runs")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Value following `key=` on the first line containing `anchor`.
fn field(text: &str, anchor: &str, key: &str) -> Result<f64, String> {
    let line = text
        .lines()
        .find(|l| l.contains(anchor))
        .ok_or_else(|| format!("no line containing `{anchor}`"))?;
    let rest = line
        .split_once(key)
        .ok_or_else(|| format!("no `{key}` in `{line}`"))?
        .1;
    let token: String = rest
        .chars()
        .take_while(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | '-'))
        .collect();
    token.parse().map_err(|_| format!("unparsable `{token}` in `{line}`"))
}

fn within(name: &str, got: f64, want: f64, tol: f64) -> Result<String, String> {
    if (got - want).abs() <= tol {
        Ok(format!("{name}={got}"))
    } else {
        Err(format!("{name}={got}, expected {want} +/- {tol}"))
    }
}

fn stats_reproduction() -> Verdict {
    let csv = fixtures().join("paper_counts.csv");
    let start = Instant::now();
    let out = sdrs(&["stats", csv.to_str().unwrap()]);
    let elapsed = start.elapsed();
    ensure(out.status.success(), || format!("stats exited {:?}", out.status.code()))?;
    let text = String::from_utf8_lossy(&out.stdout);
    let non_decisive = text
        .lines()
        .find_map(|l| l.strip_prefix("chi2 SCH-P vs SCH-D: discontinuity"))
        .and_then(|l| l.split_once("; non-decisive"))
        .map(|(_, rest)| rest.to_string())
        .ok_or("no SCH-P vs SCH-D comparison line")?;
    let checks = [
        within("chi2 untreated", field(&text, "chi2 SCH-S", "chi2=")?, 22.015, 0.01)?,
        within("chi2 treated", field(&text, "chi2 SCH-A", "chi2=")?, 13.141, 0.01)?,
        within(
            "p discontinuity",
            field(&text, "chi2 SCH-P vs SCH-D: discontinuity", " p=")?,
            0.319,
            0.002,
        )?,
        within("p non-decisive", field(&non_decisive, "", " p=")?, 0.649, 0.002)?,
        within("binomial p", field(&text, "binomial decisive", "p0=0.5 p=")?, 0.00195, 1e-5)?,
    ];
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{}; {:.0?}", checks.join(", "), elapsed))
}

fn check_json(name: &str) -> Result<(Option<i32>, Value), String> {
    let path = fixtures().join("transcripts").join(name);
    let out = sdrs(&["check", "--format", "json", path.to_str().unwrap()]);
    let json: Value = serde_json::from_slice(&out.stdout).map_err(|e| format!("{name}: {e}"))?;
    Ok((out.status.code(), json["reports"][0].clone()))
}

fn violations_of(report: &Value, kind: &str) -> Vec<String> {
    report["violations"]
        .as_array()
        .into_iter()
        .flatten()
        .filter(|v| v["kind"] == kind)
        .map(|v| v["trigger_node"].as_str().unwrap_or_default().to_string())
        .collect()
}

fn extract_fixtures() -> Verdict {
    let (code, r1) = check_json("extract1.dlg")?;
    ensure(code == Some(1), || format!("extract-1 exit {code:?}"))?;
    let ruptures = violations_of(&r1, "RightFrontierRupture");
    let ascents = violations_of(&r1, "AscentWithoutClosure");
    ensure(ruptures == ["B130.1", "B132.3"] && ascents.is_empty(), || {
        format!("extract-1: ruptures {ruptures:?}, ascents {ascents:?}")
    })?;

    let (code, r2) = check_json("extract2.dlg")?;
    ensure(code == Some(1), || format!("extract-2 exit {code:?}"))?;
    let ruptures = violations_of(&r2, "RightFrontierRupture");
    let ascents = violations_of(&r2, "AscentWithoutClosure");
    ensure(ascents == ["G88.1"] && ruptures.is_empty(), || {
        format!("extract-2: ruptures {ruptures:?}, ascents {ascents:?}")
    })?;
    let v87_attached = r2["charity_view"]["edges"]
        .as_array()
        .into_iter()
        .flatten()
        .any(|e| e["node"] == "V87.1");
    ensure(v87_attached, || "extract-2: V87.1 missing from the tree".into())?;
    Ok("extract-1: 2 ruptures (B130.1, B132.3), 0 ascents; extract-2: 1 ascent (G88.1), V87.1 licit".into())
}

fn strict_soundness() -> Verdict {
    let mut r = rng(0x5eed_0001);
    let mut events = 0;
    for i in 0..10_000 {
        let n = i % 21;
        let g = random_attachment_run(&mut r, n, Mode::Strict, |_| {});
        for e in g.history() {
            events += 1;
            ensure(e.on_frontier && e.frontier_snapshot.contains(&e.realized_site), || {
                format!("sequence {i}: {} attached off the frontier at {}", e.new_node, e.realized_site)
            })?;
        }
    }
    Ok(format!("10000 sequences, {events} attachments, 0 off-frontier"))
}

fn frontier_oracle() -> Verdict {
    let mut r = rng(0x5eed_0002);
    let mut graphs = 0usize;
    let mut failure = None;
    for i in 0..1_000 {
        let n = i % 12;
        random_attachment_run(&mut r, n, Mode::Charity, |g| {
            graphs += 1;
            if failure.is_none() && g.right_frontier().into_vec() != brute_force_frontier(g) {
                failure = Some(format!("run {i}: mismatch after {}", g.last_node()));
            }
        });
    }
    match failure {
        Some(f) => Err(f),
        None => Ok(format!("{graphs} graphs of at most 12 nodes agree")),
    }
}

fn duality() -> Verdict {
    let mut r = rng(0x5eed_0003);
    let mut off = 0;
    for i in 0..1_000 {
        let doc = random_transcript(&mut r, 20);
        let report = analyze(&doc).map_err(|e| format!("transcript {i}: {e}"))?;
        let (c, p) = (&report.charity_view, &report.repair_view);
        let ids = |g: &sdrs_core::DiscourseGraph| g.acts().map(|a| a.id.clone()).collect::<Vec<_>>();
        ensure(ids(c) == ids(p), || format!("transcript {i}: node sets differ"))?;
        let repair_clean = p.history().iter().all(|e| e.frontier_snapshot.contains(&e.realized_site))
            && p.violations().iter().all(|v| v.kind != ViolationKind::RightFrontierRupture);
        ensure(repair_clean, || format!("transcript {i}: repair view breaks the frontier"))?;
        let pure = c
            .theme_boxes()
            .iter()
            .all(|b| b.members.iter().all(|m| c.act(m).is_some_and(|a| a.theme.matches(&b.theme))));
        ensure(pure, || format!("transcript {i}: charity box mixes themes"))?;
        off += c.history().iter().filter(|e| !e.on_frontier).count();
    }
    Ok(format!("1000 transcripts, {off} off-frontier requests absorbed"))
}

fn binomial_oracle() -> Verdict {
    let half = BigRational::new(1.into(), 2.into());
    let mut cases = 0;
    for n in 0..=12u32 {
        for k in 0..=n {
            let exact = binomial_upper_tail_exact(k.into(), n.into(), 0.5).map_err(|e| e.to_string())?;
            ensure(exact == binomial_tail_by_enumeration(k, n, &half), || {
                format!("k={k} n={n}: {exact}")
            })?;
            cases += 1;
        }
    }
    Ok(format!("{cases} (k, n) pairs match exactly"))
}

fn chi2_oracle() -> Verdict {
    let mut worst: f64 = 0.0;
    for i in 0..=3000 {
        let x = i as f64 * 0.01;
        worst = worst.max((chi2_sf_df1(x) - chi2_df1_tail_by_quadrature(x)).abs());
    }
    ensure(worst <= 1e-6, || format!("max |delta| {worst:e}"))?;
    Ok(format!("3001 grid points on [0, 30], max |delta| {worst:.1e}"))
}

fn round_trip() -> Verdict {
    let mut r = rng(0x5eed_0004);
    for i in 0..1_000 {
        let doc = random_transcript(&mut r, 20);
        let text = doc.serialize();
        let back: TranscriptDocument = text.parse().map_err(|e| format!("document {i}: {e}"))?;
        ensure(back == doc, || format!("document {i} changed:\n{text}"))?;
        ensure(back.serialize() == text, || format!("document {i}: serialization unstable"))?;
    }
    // views built from a reparsed document are the same trees
    let doc = random_transcript(&mut r, 20);
    let back: TranscriptDocument = doc.serialize().parse().unwrap();
    ensure(
        build_view(&doc, Mode::Charity).unwrap() == build_view(&back, Mode::Charity).unwrap(),
        || "reparsed document builds a different tree".into(),
    )?;
    Ok("1000 generated documents".into())
}

fn determinism() -> Verdict {
    let dir = fixtures().join("transcripts");
    let dir = dir.to_str().unwrap();
    for format in ["text", "json"] {
        let a = sdrs(&["check", "--format", format, dir]);
        let b = sdrs(&["check", "--format", format, dir]);
        ensure(a.status.code() == b.status.code(), || format!("{format}: exit codes differ"))?;
        ensure(!a.stdout.is_empty() && a.stdout == b.stdout, || {
            format!("{format}: reports differ between runs")
        })?;
    }
    Ok("two check runs byte-identical (text and json)".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 statistics reproduction", stats_reproduction),
        ("2 extract fixtures", extract_fixtures),
        ("3a strict-mode soundness", strict_soundness),
        ("3b frontier oracle", frontier_oracle),
        ("3c charity/repair duality", duality),
        ("3d binomial vs enumeration", binomial_oracle),
        ("3e chi2 p vs quadrature", chi2_oracle),
        ("3f transcript round-trip", round_trip),
        ("4 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
