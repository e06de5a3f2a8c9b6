//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the report is always printed.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;
mod common;

use std::ffi::OsString;
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocalize_core::analytics::{concentration, funnel_report, FunnelCounts, FunnelReport};
use vocalize_core::audio::{compute_envelope, EnvelopeVector, MonoSignal};
use vocalize_core::campaign::{parse_log, AttemptResult, CampaignState, LeaderboardEntry};
use vocalize_core::contour::ContourVector;
use vocalize_core::scoring::{cosine_similarity, keyword_score, levenshtein, normalize_text, shape_score_cosine};
use vocalize_service::app::MessageResponse;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Option<Duration>, Box<dyn FnOnce() -> Outcome>);

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn keyword_suite() -> Outcome {
    let identities = [
        ("I love Berlin", "i love berlin"),
        ("I love Berlin!", "  i LOVE   berlin "),
        ("Go to Infobip.", "go to infobip"),
        ("Ich liebe Köln", "ich liebe köln"),
        ("", ""),
        ("café", "cafe\u{301}"),
    ];
    for (a, b) in identities {
        let s = keyword_score(a, b).value;
        ensure(s == 1.0, || format!("identity {a:?}/{b:?} scored {s}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let word = |rng: &mut ChaCha8Rng, alphabet: &[u8], max: usize| -> String {
        let n = rng.gen_range(1..=max);
        (0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())] as char).collect()
    };
    for _ in 0..1000 {
        let a = word(&mut rng, b"abcdefghijklm", 12);
        let b = word(&mut rng, b"nopqrstuvwxyz", 12);
        let s = keyword_score(&a, &b).value;
        ensure(s == 0.0, || format!("disjoint {a:?}/{b:?} scored {s}"))?;
    }
    for i in 0..1000 {
        let a = word(&mut rng, b"abc de!ABC", 14);
        let b = word(&mut rng, b"abcd e?ABD", 14);
        let (na, nb) = (normalize_text(&a), normalize_text(&b));
        let d = levenshtein(&na, &nb);
        let expected = oracles::levenshtein_table(&na, &nb);
        ensure(d == expected, || format!("pair {i}: distance {d} != {expected}"))?;
        let s = keyword_score(&a, &b).value;
        let want = oracles::keyword_oracle(&na, &nb);
        ensure(s == want, || format!("pair {i}: score {s} != {want}"))?;
    }
    Ok("6 identities, 1000 disjoint pairs, 1000 oracle pairs".into())
}

fn random_bins(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..40).map(|_| rng.gen_range(0.0..5.0)).collect()
}

fn shape_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let u = random_bins(&mut rng);
        let c = rng.gen_range(0.01..100.0);
        let self_sim = cosine_similarity(&u, &u).map_err(|e| e.to_string())?;
        ensure((self_sim - 1.0).abs() <= 1e-12, || format!("self-similarity {self_sim}"))?;
        let env = EnvelopeVector {
            bins: u.iter().map(|x| x * c).collect(),
            source_duration_s: 1.0,
        };
        let target = ContourVector::new(u.clone(), "").map_err(|e| e.to_string())?;
        let scaled = shape_score_cosine(&env, &target).map_err(|e| e.to_string())?.value;
        ensure((scaled - 1.0).abs() <= 1e-12, || format!("scale invariance {scaled} at c={c}"))?;
        let v = random_bins(&mut rng);
        for s in [self_sim, scaled, cosine_similarity(&u, &v).map_err(|e| e.to_string())?] {
            ensure((0.0..=1.0 + 1e-12).contains(&s), || format!("out of range {s}"))?;
            worst = worst.max((s - 1.0).abs().min(s));
        }
    }
    let mut left = vec![0.0; 40];
    let mut right = vec![0.0; 40];
    for i in 0..20 {
        left[i] = 1.0 + i as f64;
        right[20 + i] = 2.0;
    }
    let disjoint = cosine_similarity(&left, &right).map_err(|e| e.to_string())?;
    ensure(disjoint == 0.0, || format!("disjoint support scored {disjoint}"))?;
    Ok("100 random vectors and scales, disjoint support 0".into())
}

fn envelope_suite() -> Outcome {
    for (value, len) in [(0.5, 8000), (-0.25, 4040), (1.0, 40), (0.0, 12345)] {
        let env = compute_envelope(&MonoSignal::new(vec![value; len], 8000).unwrap(), 40).map_err(|e| e.to_string())?;
        ensure(env.bins.iter().all(|&b| b == f64::abs(value)), || format!("constant {value}: {:?}", env.bins))?;
    }
    let sine: Vec<f64> = (0..32_000)
        .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16_000.0).sin())
        .collect();
    let signal = MonoSignal::new(sine, 16_000).unwrap();
    let env = compute_envelope(&signal, 40).map_err(|e| e.to_string())?;
    // The stated target value, not a stand-in for FRAC_1_SQRT_2.
    #[allow(clippy::approx_constant)]
    let target = 0.70710678;
    let worst = env.bins.iter().map(|b| (b - target).abs()).fold(0.0, f64::max);
    ensure(worst <= 1e-3, || format!("sine RMS off by {worst}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..100 {
        let len = rng.gen_range(40..5000);
        let samples: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let signal = MonoSignal::new(samples.clone(), 16_000).unwrap();
        let env = compute_envelope(&signal, 40).map_err(|e| e.to_string())?;
        let oracle = oracles::envelope_oracle(&samples, 40);
        ensure(env.bins == oracle, || format!("signal {i}: envelope differs from segment oracle"))?;
        let gain = rng.gen_range(0.01..=1.0);
        let scaled = compute_envelope(&signal.scaled(gain).unwrap(), 40).map_err(|e| e.to_string())?;
        for (a, b) in scaled.bins.iter().zip(&env.bins) {
            ensure((a - gain * b).abs() <= 1e-9, || format!("signal {i}: homogeneity {a} vs {}", gain * b))?;
        }
    }
    Ok(format!("constant bins exact, sine RMS within {worst:.1e}, 100 oracle signals"))
}

fn bundled_log(id: &str) -> Result<Vec<vocalize_core::campaign::EngagementEvent>, String> {
    let text = String::from_utf8(common::fixture(&format!("data/logs/{id}.jsonl"))).map_err(|e| e.to_string())?;
    parse_log(&text).map_err(|e| e.to_string())
}

fn funnel_replay() -> Outcome {
    let rows = [
        ("wearedevelopers-2024", [71.16, 68.60, 64.42], [25.0, 75.0]),
        ("goto-chicago-2024", [71.43, 65.71, 60.00], [13.0, 87.0]),
    ];
    let mut details = Vec::new();
    for (id, pct, mix) in rows {
        let events = bundled_log(id)?;
        let f = funnel_report(&events).map_err(|e| e.to_string())?;
        let got = [f.leads_pct, f.participants_pct, f.recurring_pct];
        ensure(got == pct, || format!("{id}: funnel {got:?}, want {pct:?}"))?;
        let got_mix = [f.text_share, f.audio_share];
        ensure(got_mix == mix, || format!("{id}: mix {got_mix:?}, want {mix:?}"))?;
        let state = CampaignState::replay(&events).map_err(|e| e.to_string())?;
        let replayed = FunnelReport::from_counts(FunnelCounts::from_state(&state), f.text_messages, f.audio_messages);
        ensure(replayed == f, || format!("{id}: replayed state disagrees with direct count"))?;
        details.push(format!("{id} {:.2}/{:.2}/{:.2} {:.0}%/{:.0}%", got[0], got[1], got[2], mix[0], mix[1]));
    }
    Ok(details.join("; "))
}

fn concentration_suite() -> Outcome {
    let events = bundled_log("wearedevelopers-2024")?;
    let pct = concentration(&events, 0.8).map_err(|e| e.to_string())? * 100.0;
    ensure((pct - 24.11).abs() <= 0.5, || format!("fixture gives {pct:.2}%"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 200 {
        let (events, truth) = oracles::random_log(&mut rng, 30, 150);
        if truth.attempts.is_empty() {
            continue;
        }
        let percent = rng.gen_range(1..=100u64);
        let got = concentration(&events, percent as f64 / 100.0).map_err(|e| e.to_string())?;
        let want = oracles::concentration_oracle(&truth.attempts_per_user, percent);
        ensure(got == want, || format!("log {checked}: {got} != {want} at {percent}%"))?;
        checked += 1;
    }
    Ok(format!("fixture {pct:.2}% (target 24.11 +/- 0.5), 200 random logs"))
}

async fn service_attempt(dir: &std::path::Path) -> Result<(String, Vec<LeaderboardEntry>), String> {
    let app = common::app(dir);
    common::onboard(&app, "player").await;
    let (status, body) =
        common::audio(&app, "berlin-e2e", "player", &common::fixture("e2e/attempt.wav"), "2024-07-17T10:05:00Z").await;
    ensure(status == StatusCode::OK, || format!("submission returned {status}"))?;
    let response: MessageResponse = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
    let attempt: AttemptResult = response.attempt.ok_or("no attempt in response")?;
    let (_, board) = common::get(&app, "/campaigns/berlin-e2e/leaderboard").await;
    let board: Vec<LeaderboardEntry> = serde_json::from_slice(&board).map_err(|e| e.to_string())?;
    Ok((serde_json::to_string(&attempt).map_err(|e| e.to_string())?, board))
}

async fn end_to_end() -> Outcome {
    let (first_dir, second_dir) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (first, board) = service_attempt(first_dir.path()).await?;
    let (second, _) = service_attempt(second_dir.path()).await?;
    ensure(first == second, || "two service runs disagree".into())?;

    let path = |rel: &str| common::fixtures_dir().join(rel).into_os_string();
    let argv: Vec<OsString> = vec![
        "vocalize".into(),
        "score".into(),
        "--campaign".into(),
        path("e2e/campaign.json"),
        "--audio".into(),
        path("e2e/attempt.wav"),
        "--transcript".into(),
        "i love berlin".into(),
    ];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = vocalize_service::cli::run(argv, &mut out, &mut err);
    ensure(code == 0, || String::from_utf8_lossy(&err).into_owned())?;
    let cli = String::from_utf8(out).map_err(|e| e.to_string())?;
    ensure(cli.trim_end() == first, || format!("CLI {cli} vs service {first}"))?;
    let golden = String::from_utf8(common::fixture("e2e/expected_result.json")).map_err(|e| e.to_string())?;
    ensure(golden.trim_end() == first, || "result differs from the golden fixture".into())?;

    let log = std::fs::read_to_string(first_dir.path().join("logs/berlin-e2e.jsonl")).map_err(|e| e.to_string())?;
    let events = parse_log(&log).map_err(|e| e.to_string())?;
    let replayed = CampaignState::replay(&events).map_err(|e| e.to_string())?.leaderboard(None);
    ensure(replayed == board, || "replayed leaderboard differs".into())?;
    Ok(format!("{} bytes identical across 2 service runs, CLI and golden; {} events replayed", first.len(), events.len()))
}

fn leaderboard_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for set in 0..500 {
        let (events, truth) = oracles::random_log(&mut rng, 50, 200);
        let board = CampaignState::replay(&events).map_err(|e| e.to_string())?.leaderboard(None);
        let oracle = oracles::leaderboard_oracle(&truth.attempts);
        ensure(board.len() == oracle.len(), || format!("set {set}: {} entries vs {}", board.len(), oracle.len()))?;
        for (i, (got, want)) in board.iter().zip(&oracle).enumerate() {
            let same = got.rank as usize == i + 1
                && got.user_id == want.user_id
                && got.best_score == want.best_score
                && got.best_at == want.best_at
                && got.attempt_count == want.attempts;
            ensure(same, || format!("set {set}, rank {}: {got:?} vs {want:?}", i + 1))?;
        }
    }
    Ok("500 random attempt sets".into())
}

fn main() {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("keyword score suite", Some(Duration::from_secs(5)), Box::new(keyword_suite)),
        ("shape score suite", Some(Duration::from_secs(1)), Box::new(shape_suite)),
        ("envelope suite", Some(Duration::from_secs(10)), Box::new(envelope_suite)),
        ("funnel replay", Some(Duration::from_secs(2)), Box::new(funnel_replay)),
        ("recording concentration", Some(Duration::from_secs(5)), Box::new(concentration_suite)),
        ("end-to-end determinism", Some(Duration::from_secs(10)), Box::new(move || runtime.block_on(end_to_end()))),
        ("leaderboard oracle", None, Box::new(leaderboard_suite)),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (other, _) => other,
        };
        let budget = limit.map(|l| format!(" / {l:?}")).unwrap_or_default();
        match outcome {
            Ok(detail) => println!("PASS  {name:<26} {elapsed:>9.2?}{budget}  {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name:<26} {elapsed:>9.2?}{budget}  {reason}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
