//! Brute-force reference implementations shared by the property and
//! acceptance suites. Each one is written from the definition, not from the
//! library code it checks.
#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rand::Rng;
use vocalize_core::campaign::{Contact, EngagementEvent, EventBody, ScoredAttempt};

/// Edit distance over chars from the full `(m+1) x (n+1)` table.
pub fn levenshtein_table(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let substitution = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = substitution.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// `1 - d / max(len)` on already-normalized strings.
pub fn keyword_oracle(a: &str, b: &str) -> f64 {
    let longer = a.chars().count().max(b.chars().count());
    if longer == 0 {
        return 1.0;
    }
    1.0 - levenshtein_table(a, b) as f64 / longer as f64
}

/// RMS per bin, assigning sample `i` to bin `ceil((i+1)N/L) - 1`.
pub fn envelope_oracle(samples: &[f64], n_bins: usize) -> Vec<f64> {
    let len = samples.len();
    let mut energy = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (i, s) in samples.iter().enumerate() {
        let bin = ((i + 1) * n_bins).div_ceil(len) - 1;
        energy[bin] += s * s;
        count[bin] += 1;
    }
    energy
        .iter()
        .zip(&count)
        .map(|(e, &c)| (e / c as f64).sqrt())
        .collect()
}

/// Smallest `k/n` whose top-`k` sum reaches `percent`% of the total, by
/// exhaustive search over `k` with integer arithmetic.
pub fn concentration_oracle(counts: &[u64], percent: u64) -> f64 {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let total: u64 = sorted.iter().sum();
    for k in 1..=sorted.len() {
        let top: u64 = sorted[..k].iter().sum();
        if top * 100 >= percent * total {
            return k as f64 / sorted.len() as f64;
        }
    }
    1.0
}

#[derive(Debug, Clone)]
pub struct OracleEntry {
    pub user_id: String,
    pub best_score: f64,
    pub best_at: DateTime<Utc>,
    pub attempts: u32,
}

/// Best score per user (first achievement wins ties), sorted by score
/// descending, then earlier achievement, then user id.
pub fn leaderboard_oracle(attempts: &[(String, f64, DateTime<Utc>)]) -> Vec<OracleEntry> {
    let mut best: BTreeMap<&str, OracleEntry> = BTreeMap::new();
    for (user, score, at) in attempts {
        let entry = best.entry(user).or_insert(OracleEntry {
            user_id: user.clone(),
            best_score: f64::NEG_INFINITY,
            best_at: *at,
            attempts: 0,
        });
        entry.attempts += 1;
        if *score > entry.best_score {
            entry.best_score = *score;
            entry.best_at = *at;
        }
    }
    let mut entries: Vec<OracleEntry> = best.into_values().collect();
    // Selection sort by the documented ordering.
    for i in 0..entries.len() {
        let mut pick = i;
        for j in i + 1..entries.len() {
            let (a, b) = (&entries[j], &entries[pick]);
            let before = a.best_score > b.best_score
                || (a.best_score == b.best_score
                    && (a.best_at < b.best_at || (a.best_at == b.best_at && a.user_id < b.user_id)));
            if before {
                pick = j;
            }
        }
        entries.swap(i, pick);
    }
    entries
}

pub fn at(secs: i64) -> DateTime<Utc> {
    DateTime::from_timestamp(1_721_203_200 + secs, 0).unwrap()
}

/// Appends events with consecutive sequence numbers.
pub struct LogWriter {
    pub campaign_id: String,
    pub events: Vec<EngagementEvent>,
}

impl LogWriter {
    pub fn new(campaign_id: &str) -> Self {
        Self {
            campaign_id: campaign_id.to_string(),
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, user: &str, when: DateTime<Utc>, body: EventBody) {
        let seq = self.events.len() as u64 + 1;
        let body = match body {
            EventBody::AttemptScored(mut a) => {
                a.attempt_id = format!("att-{seq:06}");
                EventBody::AttemptScored(a)
            }
            other => other,
        };
        self.events.push(EngagementEvent {
            seq,
            at: when,
            campaign_id: self.campaign_id.clone(),
            user_id: user.to_string(),
            body,
        });
    }

    pub fn text(&mut self, user: &str, when: DateTime<Utc>) {
        self.push(user, when, EventBody::InboundText { text: "hi".into() });
    }

    pub fn register(&mut self, user: &str, when: DateTime<Utc>) {
        let contact = Contact {
            email: Some(format!("{user}@example.com")),
            ..Contact::default()
        };
        self.push(user, when, EventBody::Registered { contact });
    }

    pub fn attempt(&mut self, user: &str, when: DateTime<Utc>, score: f64, duration_s: f64) {
        self.push(user, when, EventBody::InboundAudio { size_bytes: 1000 });
        self.push(
            user,
            when,
            EventBody::AttemptScored(ScoredAttempt {
                attempt_id: String::new(),
                duration_s,
                combined: score,
                keyword: None,
                shape: None,
                envelope: None,
            }),
        );
    }
}

/// Ground truth of a random log, tallied while generating it.
#[derive(Debug, Default)]
pub struct LogTruth {
    pub users: u64,
    pub registered: u64,
    pub participants: u64,
    pub recurring: u64,
    pub texts: u64,
    pub audio: u64,
    pub attempts_per_user: Vec<u64>,
    pub attempts: Vec<(String, f64, DateTime<Utc>)>,
}

/// A random but valid campaign log. Scores come from a coarse grid and
/// timestamps repeat, so ties are common.
pub fn random_log(rng: &mut impl Rng, max_users: usize, max_attempts: usize) -> (Vec<EngagementEvent>, LogTruth) {
    let mut log = LogWriter::new("random");
    let mut truth = LogTruth::default();
    let n_users = rng.gen_range(1..=max_users);
    let mut registered = vec![false; n_users];
    let mut seen = vec![false; n_users];
    let mut counts = vec![0u64; n_users];
    let mut clock = 0i64;
    let mut attempts_left = rng.gen_range(0..=max_attempts);
    let steps = n_users * 3 + attempts_left * 2;
    for _ in 0..steps {
        clock += rng.gen_range(0..3);
        let u = rng.gen_range(0..n_users);
        let user = format!("u{u:02}");
        if !seen[u] {
            seen[u] = true;
            truth.users += 1;
            truth.texts += 1;
            log.text(&user, at(clock));
            continue;
        }
        match rng.gen_range(0..4) {
            0 => {
                truth.texts += 1;
                log.text(&user, at(clock));
            }
            1 if !registered[u] => {
                registered[u] = true;
                truth.registered += 1;
                log.register(&user, at(clock));
            }
            _ if registered[u] && attempts_left > 0 => {
                attempts_left -= 1;
                let score = f64::from(rng.gen_range(0..=20u32)) / 20.0;
                counts[u] += 1;
                truth.audio += 1;
                truth.attempts.push((user.clone(), score, at(clock)));
                log.attempt(&user, at(clock), score, rng.gen_range(0.5..10.0));
            }
            _ => {}
        }
    }
    truth.participants = counts.iter().filter(|&&c| c >= 1).count() as u64;
    truth.recurring = counts.iter().filter(|&&c| c >= 2).count() as u64;
    truth.attempts_per_user = counts.into_iter().filter(|&c| c > 0).collect();
    (log.events, truth)
}
