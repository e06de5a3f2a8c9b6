//! Deterministic golden fixtures.
//!
//! The event logs are synthetic reconstructions: they reproduce published
//! per-event aggregates (funnel counts, message mix, recording counts,
//! duration totals and medians, concentration of recordings) but every
//! individual event is invented. The end-to-end set is a skyline silhouette,
//! a campaign built from it, one recording and its transcript map.

use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::audio::{encode_wav16, ENVELOPE_BINS};
use crate::campaign::{
    create_campaign, score_once, write_log, Campaign, CampaignDefinition, Contact, ContourInput,
    EngagementEvent, EventBody, ScoredAttempt,
};
use crate::contour::{contour_from_silhouette, GrayscaleImage, DEFAULT_THRESHOLD};
use crate::scoring::{fingerprint, FixtureTranscriber, ScoringConfig};
use crate::synth::{shaped_tone, skyline_image};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("profile {profile} is infeasible: {reason}")]
    Infeasible { profile: String, reason: String },
    #[error("fixture I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture campaign: {0}")]
    Campaign(#[from] crate::campaign::CampaignError),
}

/// Published aggregates for one live event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventProfile {
    pub campaign_id: &'static str,
    pub name: &'static str,
    pub catch_phrase: &'static str,
    pub first_day: (i32, u32, u32),
    pub days: u32,
    pub potential_leads: u32,
    pub leads: u32,
    pub participants: u32,
    pub recurring: u32,
    /// Scored recordings.
    pub recordings: u32,
    /// Voice notes that were rejected before scoring.
    pub rejected_audio: u32,
    pub text_messages: u32,
    pub max_recordings_per_user: u32,
    /// Heaviest participants that together send 80% of recordings.
    pub top_participants: u32,
    pub median_cs: u32,
    pub total_cs: u64,
    pub seed: u64,
}

pub const MIN_DURATION_CS: u32 = 50;
pub const MAX_DURATION_CS: u32 = 1680;

pub fn event_profiles() -> Vec<EventProfile> {
    vec![
        EventProfile {
            campaign_id: "wearedevelopers-2024",
            name: "WeAreDevelopers",
            catch_phrase: "I love Berlin",
            first_day: (2024, 7, 17),
            days: 3,
            potential_leads: 430,
            leads: 306,
            participants: 295,
            recurring: 277,
            recordings: 6321,
            rejected_audio: 0,
            text_messages: 2107,
            max_recordings_per_user: 460,
            top_participants: 71,
            median_cs: 225,
            total_cs: 1_686_000,
            seed: 17,
        },
        EventProfile {
            campaign_id: "kulendayz-2024",
            name: "KulenDayz",
            catch_phrase: "I love Kulen",
            first_day: (2024, 8, 30),
            days: 3,
            potential_leads: 66,
            leads: 47,
            participants: 46,
            recurring: 46,
            recordings: 1257,
            rejected_audio: 7,
            text_messages: 336,
            max_recordings_per_user: 259,
            top_participants: 7,
            median_cs: 205,
            total_cs: 276_000,
            seed: 30,
        },
        EventProfile {
            campaign_id: "goto-chicago-2024",
            name: "GOTO Chicago",
            catch_phrase: "Go to Infobip",
            first_day: (2024, 10, 21),
            days: 2,
            potential_leads: 35,
            leads: 25,
            participants: 23,
            recurring: 21,
            recordings: 1216,
            rejected_audio: 2,
            text_messages: 182,
            max_recordings_per_user: 381,
            top_participants: 4,
            median_cs: 338,
            total_cs: 612_000,
            seed: 21,
        },
        EventProfile {
            campaign_id: "web-summit-2024",
            name: "Web Summit",
            catch_phrase: "I love Lisbon",
            first_day: (2024, 11, 11),
            days: 4,
            potential_leads: 794,
            leads: 473,
            participants: 336,
            recurring: 219,
            recordings: 3662,
            rejected_audio: 0,
            text_messages: 6801,
            max_recordings_per_user: 298,
            top_participants: 42,
            median_cs: 269,
            total_cs: 852_000,
            seed: 11,
        },
    ]
}

pub fn profile(campaign_id: &str) -> Option<EventProfile> {
    event_profiles()
        .into_iter()
        .find(|p| p.campaign_id == campaign_id)
}

impl EventProfile {
    pub fn starts_at(&self) -> DateTime<Utc> {
        let (y, m, d) = self.first_day;
        Utc.with_ymd_and_hms(y, m, d, 8, 0, 0).unwrap()
    }

    pub fn ends_at(&self) -> DateTime<Utc> {
        self.starts_at() + Duration::days(i64::from(self.days) - 1) + Duration::hours(12)
    }

    fn infeasible(&self, reason: impl Into<String>) -> FixtureError {
        FixtureError::Infeasible {
            profile: self.campaign_id.to_string(),
            reason: reason.into(),
        }
    }
}

/// Non-increasing integers `first = v_0 >= v_1 >= ... >= min` summing to
/// `total`, shaped like `min + (first - min) * i^-a`.
pub fn power_law_counts(n: usize, first: u64, min: u64, total: u64) -> Option<Vec<u64>> {
    if n == 0 {
        return (total == 0).then(Vec::new);
    }
    if first < min || total < first + (n as u64 - 1) * min || total > n as u64 * first {
        return None;
    }
    let span = (first - min) as f64;
    let extra = (total - n as u64 * min) as f64;
    let target = if span == 0.0 { n as f64 } else { extra / span };
    let weight_sum = |a: f64| (1..=n).map(|i| (i as f64).powf(-a)).sum::<f64>();
    let (mut lo, mut hi) = (0.0f64, 64.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if weight_sum(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    let mut values: Vec<u64> = (1..=n)
        .map(|i| min + (span * (i as f64).powf(-a)).floor() as u64)
        .collect();
    values[0] = first;
    let sum: u64 = values.iter().sum();
    if sum > total {
        return None;
    }
    let residual = (total - sum) as usize;
    if residual >= n {
        return None;
    }
    for v in values.iter_mut().skip(1).take(residual) {
        *v += 1;
    }
    let ok = values.windows(2).all(|w| w[0] >= w[1])
        && values.iter().sum::<u64>() == total
        && values[n - 1] >= min;
    ok.then_some(values)
}

/// Recordings per participant, heaviest first.
pub fn recording_distribution(p: &EventProfile) -> Result<Vec<u64>, FixtureError> {
    let attempts = u64::from(p.recordings);
    let threshold = (8 * attempts).div_ceil(10);
    let k = p.top_participants as usize;
    let singles = u64::from(p.participants - p.recurring);
    let tail_multi = (p.recurring as usize)
        .checked_sub(k)
        .ok_or_else(|| p.infeasible("more top participants than recurring ones"))?;
    let tail_total = attempts
        .checked_sub(threshold + singles)
        .ok_or_else(|| p.infeasible("tail has negative size"))?;
    let head_min = if tail_multi == 0 {
        2
    } else {
        tail_total.div_ceil(tail_multi as u64) + 1
    };
    let head = power_law_counts(k, u64::from(p.max_recordings_per_user), head_min, threshold)
        .ok_or_else(|| p.infeasible("no head distribution"))?;
    let cap = *head.last().expect("non-empty head");
    let tail_first = cap.min(2 + tail_total.saturating_sub(2 * tail_multi as u64));
    let tail = power_law_counts(tail_multi, tail_first, 2, tail_total)
        .ok_or_else(|| p.infeasible("no tail distribution"))?;
    let mut counts = head;
    counts.extend(tail);
    counts.extend(std::iter::repeat_n(1, singles as usize));
    Ok(counts)
}

/// Durations in centiseconds, shuffled. Sorted, the lower-middle element is
/// the median and the values sum to the total.
pub fn duration_distribution(p: &EventProfile, rng: &mut ChaCha8Rng) -> Result<Vec<u32>, FixtureError> {
    let n = p.recordings as usize;
    let below = (n - 1) / 2;
    let above = n - 1 - below;
    let m = p.median_cs;
    let mut values: Vec<u32> = Vec::with_capacity(n);
    for i in 0..below {
        values.push(if i == 0 { MIN_DURATION_CS } else { rng.gen_range(MIN_DURATION_CS..=m) });
    }
    values.push(m);
    let fixed: u64 = values.iter().map(|&v| u64::from(v)).sum();
    let high_total = p
        .total_cs
        .checked_sub(fixed)
        .ok_or_else(|| p.infeasible("total duration too small"))?;
    let mut extra = high_total
        .checked_sub(above as u64 * u64::from(m))
        .ok_or_else(|| p.infeasible("total duration too small for the median"))?;
    let cap = u64::from(MAX_DURATION_CS - m);
    if extra > above as u64 * cap || above == 0 {
        return Err(p.infeasible("total duration too large"));
    }
    let mut extras = vec![0u64; above];
    extras[0] = cap;
    extra -= cap;
    let weights: Vec<f64> = (1..above).map(|_| rng.gen::<f64>().powi(3)).collect();
    let weight_sum: f64 = weights.iter().sum();
    for (e, w) in extras[1..].iter_mut().zip(&weights) {
        *e = ((w / weight_sum * extra as f64).floor() as u64).min(cap);
    }
    let mut left = high_total - above as u64 * u64::from(m) - extras.iter().sum::<u64>();
    while left > 0 {
        let before = left;
        for e in extras[1..].iter_mut() {
            if left > 0 && *e < cap {
                *e += 1;
                left -= 1;
            }
        }
        if left == before {
            return Err(p.infeasible("cannot place remaining duration"));
        }
    }
    values.extend(extras.iter().map(|&e| m + e as u32));
    values.shuffle(rng);
    Ok(values)
}

const SAMPLE_TEXTS: &[&str] = &[
    "hi",
    "hello",
    "what is my score",
    "how do i play",
    "what are the prizes",
    "what is my rank",
    "when does the competition end",
    "cool",
    "again!",
    "thanks",
];

enum Step {
    Text,
    Register,
    Attempt,
    Rejected,
}

struct Scripted {
    at: DateTime<Utc>,
    user: usize,
    order: usize,
    body: EventBody,
}

/// The synthetic event log for one profile.
pub fn synthesize_log(p: &EventProfile) -> Result<Vec<EngagementEvent>, FixtureError> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    if !(p.potential_leads >= p.leads
        && p.leads >= p.participants
        && p.participants >= p.recurring
        && p.text_messages >= p.potential_leads)
    {
        return Err(p.infeasible("funnel counts out of order"));
    }
    let mut counts = recording_distribution(p)?;
    counts.shuffle(&mut rng);
    let mut durations = duration_distribution(p, &mut rng)?.into_iter();

    let n_users = p.potential_leads as usize;
    // Users 0..participants compete, then leads, then potential leads only.
    let mut order: Vec<usize> = (0..n_users).collect();
    order.shuffle(&mut rng);
    let mut scripts: Vec<Vec<Step>> = Vec::with_capacity(n_users);
    let mut extra_texts = vec![0u32; n_users];
    for _ in 0..(p.text_messages - p.potential_leads) {
        extra_texts[rng.gen_range(0..n_users)] += 1;
    }
    let mut rejected = vec![0u32; p.participants as usize];
    for _ in 0..p.rejected_audio {
        rejected[rng.gen_range(0..p.participants as usize)] += 1;
    }
    for u in 0..n_users {
        let mut rest: Vec<Step> = Vec::new();
        rest.extend((0..extra_texts[u]).map(|_| Step::Text));
        if u < p.participants as usize {
            rest.extend((0..counts[u]).map(|_| Step::Attempt));
            rest.extend((0..rejected[u]).map(|_| Step::Rejected));
        }
        rest.shuffle(&mut rng);
        let mut script = vec![Step::Text];
        if u < p.leads as usize {
            // Register before the first voice note.
            let first_audio = rest
                .iter()
                .position(|s| matches!(s, Step::Attempt | Step::Rejected))
                .unwrap_or(rest.len());
            let at = rng.gen_range(0..=first_audio);
            rest.insert(at, Step::Register);
        }
        script.extend(rest);
        scripts.push(script);
    }

    let window = (p.ends_at() - p.starts_at()).num_seconds();
    let mut scripted: Vec<Scripted> = Vec::new();
    for (u, script) in scripts.iter().enumerate() {
        let user_id = format!("user-{:04}", order[u] + 1);
        let gaps: Vec<i64> = script.iter().map(|_| rng.gen_range(5..=120)).collect();
        let span: i64 = gaps.iter().sum::<i64>() + script.len() as i64;
        if span >= window {
            return Err(p.infeasible(format!("{user_id} does not fit the schedule")));
        }
        let mut t = p.starts_at() + Duration::seconds(rng.gen_range(0..window - span));
        let skill: f64 = rng.gen_range(0.35..0.75);
        let mut attempt_no = 0u32;
        let mut local = 0usize;
        let mut push = |at: DateTime<Utc>, body: EventBody, local: &mut usize| {
            scripted.push(Scripted { at, user: u, order: *local, body });
            *local += 1;
        };
        for (step, gap) in script.iter().zip(gaps) {
            t += Duration::seconds(gap);
            match step {
                Step::Text => {
                    let text = SAMPLE_TEXTS[rng.gen_range(0..SAMPLE_TEXTS.len())].to_string();
                    push(t, EventBody::InboundText { text }, &mut local);
                }
                Step::Register => {
                    let n = order[u] + 1;
                    let contact = Contact {
                        name: Some(format!("Player {n}")),
                        email: Some(format!("player{n}@example.com")),
                        phone: None,
                    };
                    push(t, EventBody::Registered { contact }, &mut local);
                }
                Step::Attempt => {
                    let cs = durations.next().expect("one duration per recording");
                    push(t, EventBody::InboundAudio { size_bytes: 44 + u64::from(cs) * 320 }, &mut local);
                    attempt_no += 1;
                    let learning = 0.15 * (1.0 - (-f64::from(attempt_no) / 10.0).exp());
                    let noise: f64 = rng.gen_range(-0.1..0.1);
                    let combined = ((skill + learning + noise).clamp(0.0, 1.0) * 1e4).round() / 1e4;
                    t += Duration::seconds(1);
                    push(
                        t,
                        EventBody::AttemptScored(ScoredAttempt {
                            attempt_id: String::new(),
                            duration_s: f64::from(cs) / 100.0,
                            combined,
                            keyword: None,
                            shape: None,
                            envelope: None,
                        }),
                        &mut local,
                    );
                }
                Step::Rejected => {
                    let size_bytes = if rng.gen_bool(0.5) { 44 + 3 * 320 } else { 44 + 7_500 * 320 };
                    push(t, EventBody::InboundAudio { size_bytes }, &mut local);
                }
            }
        }
    }
    scripted.sort_by_key(|s| (s.at, s.user, s.order));
    let events = scripted
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let seq = i as u64 + 1;
            let mut body = s.body;
            if let EventBody::AttemptScored(a) = &mut body {
                a.attempt_id = format!("att-{seq:06}");
            }
            EngagementEvent {
                seq,
                at: s.at,
                campaign_id: p.campaign_id.to_string(),
                user_id: format!("user-{:04}", order[s.user] + 1),
                body,
            }
        })
        .collect();
    Ok(events)
}

/// Skyline heights for a `width`-pixel silhouette, seeded per city.
pub fn skyline_heights(seed: u64, width: usize, height: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heights = Vec::with_capacity(width);
    while heights.len() < width {
        let w = rng.gen_range(6..=28);
        let h = rng.gen_range(height / 8..=height * 3 / 5);
        heights.extend(std::iter::repeat_n(h, w));
    }
    heights.truncate(width);
    // One landmark spire.
    let spire = rng.gen_range(width / 4..width * 3 / 4);
    for h in &mut heights[spire.saturating_sub(2)..(spire + 2).min(width)] {
        *h = height * 9 / 10;
    }
    heights
}

pub const SKYLINE_WIDTH: usize = 400;
pub const SKYLINE_HEIGHT: usize = 120;

pub fn skyline_silhouette(seed: u64) -> GrayscaleImage {
    skyline_image(&skyline_heights(seed, SKYLINE_WIDTH, SKYLINE_HEIGHT), SKYLINE_HEIGHT)
}

pub fn profile_campaign(p: &EventProfile) -> Result<Campaign, FixtureError> {
    let contour = contour_from_silhouette(&skyline_silhouette(p.seed), ENVELOPE_BINS, DEFAULT_THRESHOLD)
        .map_err(crate::campaign::CampaignError::from)?;
    Ok(create_campaign(
        CampaignDefinition {
            id: Some(p.campaign_id.to_string()),
            catch_phrase: p.catch_phrase.to_string(),
            contour: Some(ContourInput {
                bins: contour.bins().to_vec(),
                label: format!("{} skyline (synthetic)", p.name),
            }),
            silhouette: None,
            scoring: ScoringConfig::default(),
            starts_at: p.starts_at(),
            ends_at: p.ends_at(),
            min_s: None,
            max_s: None,
        },
        Default::default(),
    )?)
}

pub const E2E_SEED: u64 = 2024;
pub const E2E_CAMPAIGN_ID: &str = "berlin-e2e";
pub const E2E_TRANSCRIPT: &str = "i love berlin";

pub struct EndToEnd {
    pub silhouette_pgm: Vec<u8>,
    pub campaign: Campaign,
    pub wav: Vec<u8>,
    pub transcripts_json: String,
}

pub fn end_to_end() -> Result<EndToEnd, FixtureError> {
    let image = skyline_silhouette(E2E_SEED);
    let contour = contour_from_silhouette(&image, ENVELOPE_BINS, DEFAULT_THRESHOLD)
        .map_err(crate::campaign::CampaignError::from)?;
    let campaign = create_campaign(
        CampaignDefinition {
            id: Some(E2E_CAMPAIGN_ID.into()),
            catch_phrase: "I love Berlin".into(),
            contour: Some(ContourInput {
                bins: contour.bins().to_vec(),
                label: "Berlin skyline (synthetic)".into(),
            }),
            silhouette: None,
            scoring: ScoringConfig::default(),
            starts_at: Utc.with_ymd_and_hms(2024, 7, 17, 8, 0, 0).unwrap(),
            ends_at: Utc.with_ymd_and_hms(2024, 7, 19, 20, 0, 0).unwrap(),
            min_s: None,
            max_s: None,
        },
        Default::default(),
    )?;
    // A voice that roughly follows the skyline: smoothed and offset.
    let bins = contour.bins();
    let shape: Vec<f64> = (0..bins.len())
        .map(|i| {
            let prev = bins[i.saturating_sub(1)];
            let next = bins[(i + 1).min(bins.len() - 1)];
            0.25 * prev + 0.5 * bins[i] + 0.25 * next + 8.0
        })
        .collect();
    let wav = encode_wav16(&shaped_tone(&shape, 2.25, 16_000, 220.0, 0.7));
    let mut map = std::collections::BTreeMap::new();
    map.insert(fingerprint(&wav), E2E_TRANSCRIPT.to_string());
    let transcripts_json = serde_json::to_string_pretty(&map).expect("map serializes") + "\n";
    Ok(EndToEnd {
        silhouette_pgm: image.to_pgm(),
        campaign,
        wav,
        transcripts_json,
    })
}

impl EndToEnd {
    pub fn transcriber(&self) -> FixtureTranscriber {
        FixtureTranscriber::from_json(self.transcripts_json.as_bytes()).expect("generated map parses")
    }

    /// Compact JSON of the attempt result for the fixture WAV.
    pub fn expected_result_json(&self) -> Result<String, FixtureError> {
        let result = score_once(&self.campaign, &self.wav, &self.transcriber())?;
        Ok(serde_json::to_string(&result).expect("result serializes"))
    }
}

/// Writes all fixtures under `root`:
/// `data/campaigns/*.json`, `data/logs/*.jsonl` and `e2e/*`.
pub fn write_fixtures(root: &Path) -> Result<Vec<std::path::PathBuf>, FixtureError> {
    let campaigns = root.join("data").join("campaigns");
    let logs = root.join("data").join("logs");
    let e2e_dir = root.join("e2e");
    for dir in [&campaigns, &logs, &e2e_dir] {
        std::fs::create_dir_all(dir)?;
    }
    let mut written = Vec::new();
    let mut put = |path: std::path::PathBuf, bytes: &[u8]| -> Result<(), FixtureError> {
        std::fs::write(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    for p in event_profiles() {
        let campaign = profile_campaign(&p)?;
        put(campaigns.join(format!("{}.json", p.campaign_id)), (campaign.to_json_pretty() + "\n").as_bytes())?;
        let mut buf = Vec::new();
        write_log(&mut buf, &synthesize_log(&p)?)?;
        put(logs.join(format!("{}.jsonl", p.campaign_id)), &buf)?;
    }
    let e2e = end_to_end()?;
    put(e2e_dir.join("berlin.pgm"), &e2e.silhouette_pgm)?;
    put(e2e_dir.join("campaign.json"), (e2e.campaign.to_json_pretty() + "\n").as_bytes())?;
    put(e2e_dir.join("attempt.wav"), &e2e.wav)?;
    put(e2e_dir.join("transcripts.json"), e2e.transcripts_json.as_bytes())?;
    put(e2e_dir.join("expected_result.json"), (e2e.expected_result_json()? + "\n").as_bytes())?;
    Ok(written)
}
