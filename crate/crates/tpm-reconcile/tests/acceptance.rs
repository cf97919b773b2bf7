//! Acceptance suite: one test per release criterion.
//!
//! Each test prints a single `criterion N: PASS/FAIL (...)` line
//! (visible with `--nocapture`, or automatically on failure) and then
//! asserts the verdict, so a red criterion fails the build rather
//! than hiding behind a log line. Expected values come from
//! independent oracles: closed-form constants evaluated at high
//! precision, naive re-implementations, and exhaustive enumeration —
//! never from the code under test.

use std::collections::HashSet;
use std::thread;
use std::time::Duration;

use tpm_reconcile::adversary::SessionRecord;
use tpm_reconcile::channel::{generate_key, trial_seed, SeededRng};
use tpm_reconcile::codec::{decode, derive_halfwidth, encode, sequence_length, BitString};
use tpm_reconcile::metrics::{entropy_loss, frame_error_rate, spearman};
use tpm_reconcile::session::{
    challenge_rng, init_session, reconcile, reconcile_detailed, run_iteration, run_trial,
    trial_keys, SessionConfig,
};
use tpm_reconcile::sweep::{
    render_csv, render_json, run_qber_sweep, run_range_sweep, run_sweep, with_thread_limit,
    SweepSpec,
};
use tpm_reconcile::tpm::{evaluate, weights_equal, InputVector, LearningRule, TpmParams};
use tpm_reconcile::wire::{
    accept_one, connect_retry, decode_frame, encode_frame, open_listener, run_peer_tcp, session_id,
    Message, Role,
};

/// Prints the criterion verdict line and enforces it.
fn report(criterion: &str, pass: bool, details: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {verdict} ({details})");
    assert!(pass, "criterion {criterion}: {verdict} ({details})");
}

/// Small standalone generator for test-local randomness that must not
/// depend on the crate under test.
struct Xorshift(u64);

impl Xorshift {
    fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }
}

#[test]
fn criterion_01_codec_exactness() {
    // decode ∘ encode is the identity on 10^4 random strings for every
    // block size b in 1..=10 (geometry K=3, N=4 keeps strings short).
    let mut roundtrip_failures = 0u32;
    for block_bits in 1..=10u32 {
        let length = sequence_length(block_bits, 3, 4).unwrap();
        let mut rng = SeededRng::new(0xC0DEC + u64::from(block_bits));
        for _ in 0..10_000 {
            let bits = generate_key(length, &mut rng).unwrap();
            let weights = encode(&bits, block_bits, 3, 4).unwrap();
            if decode(&weights, block_bits).unwrap() != bits {
                roundtrip_failures += 1;
            }
        }
    }

    // The per-block map is a bijection: all 2^b block values hit 2^b
    // distinct in-range weights and come back, exhaustively per b.
    let mut bijection_failures = 0u32;
    for block_bits in 1..=10u32 {
        let half_width = derive_halfwidth(block_bits).unwrap();
        let mut seen = HashSet::new();
        for value in 0..(1u32 << block_bits) {
            let bits: Vec<u8> = (0..block_bits)
                .rev()
                .map(|i| ((value >> i) & 1) as u8)
                .collect();
            let block = BitString::from_bits(bits).unwrap();
            let weights = encode(&block, block_bits, 1, 1).unwrap();
            let weight = weights.values()[0];
            let in_range = (-half_width..half_width).contains(&weight);
            let fresh = seen.insert(weight);
            let back = decode(&weights, block_bits).unwrap() == block;
            if !(in_range && fresh && back) {
                bijection_failures += 1;
            }
        }
        if seen.len() != 1usize << block_bits {
            bijection_failures += 1;
        }
    }

    report(
        "1 codec exactness",
        roundtrip_failures == 0 && bijection_failures == 0,
        &format!(
            "{roundtrip_failures} roundtrip failures, {bijection_failures} bijection failures \
             over 10^5 strings and all blocks b<=10"
        ),
    );
}

#[test]
fn criterion_02_entropy_loss_oracle() {
    // 100 / log2(17) evaluated independently at 30-digit precision.
    let oracle = 24.465054211822603_f64;
    let z = entropy_loss(100, 8);
    let oracle_error = ((z - oracle) / oracle).abs();

    // Z is linear in the iteration count: Z(i, L) == i * Z(1, L).
    let mut worst_linearity = 0.0_f64;
    let mut rng = SeededRng::new(0xE2);
    for _ in 0..1_000 {
        let iterations = 1 + rng.value() % 1_000_000;
        let half_width = 1 + (rng.value() % (1 << 20)) as i32;
        let direct = entropy_loss(iterations, half_width);
        let scaled = iterations as f64 * entropy_loss(1, half_width);
        worst_linearity = worst_linearity.max(((direct - scaled) / direct).abs());
    }

    report(
        "2 entropy-loss oracle",
        oracle_error <= 1e-9 && worst_linearity <= 1e-9,
        &format!(
            "relative error {oracle_error:.2e} against 100/log2(17), \
             worst linearity deviation {worst_linearity:.2e} over 10^3 (i, L)"
        ),
    );
}

#[test]
fn criterion_03_brute_force_equivalence() {
    // An independent naive evaluator: literal sums, sign(0) = -1,
    // output = product of hidden bits.
    fn naive(weights: &[Vec<i32>], input: &[i8]) -> (Vec<i8>, i8) {
        let inputs_per_unit = weights[0].len();
        let hidden: Vec<i8> = weights
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let field: i64 = row
                    .iter()
                    .enumerate()
                    .map(|(j, &w)| i64::from(w) * i64::from(input[k * inputs_per_unit + j]))
                    .sum();
                if field > 0 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        let output = hidden.iter().product();
        (hidden, output)
    }

    // K=2, N=2 covers the 16-input space exhaustively; K=2, N=4 the
    // 256-input space. 100 random L=2 matrices each.
    let mut mismatches = 0u64;
    let mut generator = Xorshift(0x1357_9BDF_2468_ACE1);
    for (hidden_units, inputs_per_unit) in [(2usize, 2usize), (2, 4)] {
        let entry_count = hidden_units * inputs_per_unit;
        for _ in 0..100 {
            let rows: Vec<Vec<i32>> = (0..hidden_units)
                .map(|_| {
                    (0..inputs_per_unit)
                        .map(|_| -2 + (generator.next() % 4) as i32)
                        .collect()
                })
                .collect();
            let flat: Vec<i32> = rows.iter().flatten().copied().collect();
            let matrix = tpm_reconcile::tpm::WeightMatrix::from_values(
                hidden_units,
                inputs_per_unit,
                2,
                flat,
            )
            .unwrap();
            for mask in 0..(1u32 << entry_count) {
                let entries: Vec<i8> = (0..entry_count)
                    .map(|i| if (mask >> i) & 1 == 1 { 1 } else { -1 })
                    .collect();
                let input = InputVector::from_entries(entries.clone()).unwrap();
                let evaluation = evaluate(&matrix, &input).unwrap();
                let (hidden, output) = naive(&rows, &entries);
                if evaluation.hidden != hidden || evaluation.output != output {
                    mismatches += 1;
                }
            }
        }
    }

    report(
        "3 brute-force equivalence",
        mismatches == 0,
        &format!("{mismatches} mismatches over (16 + 256) inputs x 100 matrices"),
    );
}

#[test]
fn criterion_04_synchrony_preservation() {
    // Two networks starting identical must stay identical through
    // 10^3 joint iterations, under each training rule.
    let mut broken = 0u64;
    for rule in LearningRule::ALL {
        let params = TpmParams::new(10, 15, 8, rule).unwrap();
        let config = SessionConfig::new(params, 4, 300, false).unwrap();
        let mut key_rng = SeededRng::new(0x5EED ^ u64::from(rule.code()));
        let key = generate_key(600, &mut key_rng).unwrap();
        let (mut alice, mut bob) = init_session(&key, &key, &config).unwrap();
        let mut challenges = SeededRng::new(0xABCD + u64::from(rule.code()));
        for iteration in 1..=1_000u64 {
            let entry = run_iteration(&mut alice, &mut bob, &mut challenges, 1, iteration).unwrap();
            let equal = weights_equal(alice.weights(), bob.weights()).unwrap();
            if !(entry.matched && entry.trained && equal) {
                broken += 1;
            }
        }
    }

    report(
        "4 synchrony preservation",
        broken == 0,
        &format!("{broken} violations over 3 rules x 10^3 joint iterations"),
    );
}

#[test]
fn criterion_05_zero_qber_limit() {
    let config = SessionConfig::default();
    let mut violations = 0u64;
    let mut failed = 0u64;
    for trial in 0..100u32 {
        let report = run_trial(&config, 0.0, trial_seed(0, 50, trial)).unwrap();
        if !report.success {
            failed += 1;
        }
        if report.rounds != 0 || report.total_iterations != 0 || report.entropy_loss != 0.0 {
            violations += 1;
        }
    }
    let fer = frame_error_rate(failed, 100).unwrap();

    report(
        "5 zero-QBER limit",
        fer == 0.0 && violations == 0,
        &format!("FER {fer}, {violations} nonzero-cost reports over 100 frames"),
    );
}

#[test]
fn criterion_06_qber_trend() {
    let mut spec = SweepSpec::qber_sweep(vec![0.01, 0.03, 0.05, 0.08, 0.10, 0.13, 0.15]);
    spec.trials_per_point = 200;
    let table = run_qber_sweep(&spec).unwrap();

    for row in &table.rows {
        println!(
            "  qber {:>5}: fer {:.3} mean_iterations {:>8.3} mean_Z {:>7.3}",
            row.independent_value, row.fer, row.mean_iterations, row.mean_entropy_loss
        );
    }

    let qbers = spec.grid.clone();
    let mean_iterations: Vec<f64> = table.rows.iter().map(|r| r.mean_iterations).collect();
    let mean_z: Vec<f64> = table.rows.iter().map(|r| r.mean_entropy_loss).collect();
    let rho_iterations = spearman(&qbers, &mean_iterations).unwrap();
    let rho_z = spearman(&qbers, &mean_z).unwrap();

    // FER must be nondecreasing, allowing at most one inversion and
    // only within two standard errors of the paired difference.
    let mut inversions = 0u32;
    let mut inversion_within_tolerance = true;
    for pair in table.rows.windows(2) {
        if pair[1].fer < pair[0].fer {
            inversions += 1;
            let trials = pair[0].trials as f64;
            let variance = pair[0].fer * (1.0 - pair[0].fer) + pair[1].fer * (1.0 - pair[1].fer);
            let standard_error = (variance / trials).sqrt();
            if pair[0].fer - pair[1].fer > 2.0 * standard_error {
                inversion_within_tolerance = false;
            }
        }
    }
    let fer_ok = inversions <= 1 && inversion_within_tolerance;

    report(
        "6 QBER trend",
        rho_iterations >= 0.95 && rho_z >= 0.95 && fer_ok,
        &format!(
            "spearman(mean iterations, qber) = {rho_iterations:.4}, \
             spearman(mean Z, qber) = {rho_z:.4} (threshold 0.95); \
             FER inversions = {inversions} (tolerated: <=1 within 2 SE)"
        ),
    );
}

#[test]
fn criterion_07_range_trend() {
    let mut spec = SweepSpec::range_sweep(0.15, &[8, 32, 128, 512]);
    spec.trials_per_point = 100;
    let table = run_range_sweep(&spec).unwrap();

    for row in &table.rows {
        println!(
            "  L {:>4}: fer {:.3} mean_iterations {:>8.3} mean_Z {:>7.3}",
            row.independent_value, row.fer, row.mean_iterations, row.mean_entropy_loss
        );
    }

    let mean_z: Vec<f64> = table.rows.iter().map(|r| r.mean_entropy_loss).collect();
    let strictly_decreasing = mean_z.windows(2).all(|pair| pair[1] < pair[0]);

    let fer_8 = table.rows[0].fer;
    let fer_128 = table.rows[2].fer;
    let trials = table.rows[0].trials as f64;
    let variance = fer_8 * (1.0 - fer_8) + fer_128 * (1.0 - fer_128);
    let standard_error = (variance / trials).sqrt();
    let fer_ok = fer_128 >= fer_8 - 2.0 * standard_error;

    report(
        "7 weight-range trend",
        strictly_decreasing && fer_ok,
        &format!(
            "mean Z over L in {{8,32,128,512}} = {mean_z:?} (strictly decreasing: \
             {strictly_decreasing}); FER(128) = {fer_128} vs FER(8) = {fer_8} within 2 SE"
        ),
    );
}

/// Draws one structurally valid message of a random type, using only
/// the public message constructors.
fn random_message(rng: &mut SeededRng) -> Message {
    match rng.value() % 6 {
        0 => Message::Hello {
            version: (rng.value() % 256) as u8,
            role: if rng.bit() == 1 {
                Role::Alice
            } else {
                Role::Bob
            },
            rule: LearningRule::ALL[(rng.value() % 3) as usize],
            block_bits: (rng.value() % 256) as u8,
            hidden_units: rng.value() as u32,
            inputs_per_unit: rng.value() as u32,
            half_width: rng.value() as u32,
            max_iterations: rng.value(),
            session_id: rng.value(),
        },
        1 => {
            let hidden_units = 1 + rng.value() % 4;
            let inputs_per_unit = 1 + rng.value() % 40;
            let count = (hidden_units * inputs_per_unit) as usize;
            let entries: Vec<i8> = (0..count).map(|_| rng.sign()).collect();
            Message::Challenge {
                iteration_index: rng.value(),
                hidden_units: hidden_units as u32,
                inputs_per_unit: inputs_per_unit as u32,
                tau: rng.sign(),
                input: InputVector::from_entries(entries).unwrap(),
            }
        }
        2 => Message::Response {
            iteration_index: rng.value(),
            tau: rng.sign(),
        },
        3 => {
            let mut digest = [0u8; 32];
            for byte in digest.iter_mut() {
                *byte = (rng.value() % 256) as u8;
            }
            Message::SyncProbe {
                round_index: rng.value(),
                digest,
            }
        }
        4 => Message::SyncAck {
            round_index: rng.value(),
            equal: rng.bit() == 1,
        },
        _ => Message::Done {
            success: rng.bit() == 1,
            total_iterations: rng.value(),
            rounds: rng.value(),
        },
    }
}

#[test]
fn criterion_08_transport_equivalence() {
    // Part 1: 50 loopback sessions across three error rates must
    // reproduce the in-process reports field for field, on both ends.
    let config = SessionConfig::default();
    let qbers = [0.0, 0.05, 0.15];
    let mut report_mismatches = 0u32;
    for trial in 0..50u32 {
        let point = trial % 3;
        let qber = qbers[point as usize];
        let seed = trial_seed(0, 80 + point, trial / 3);
        let (alice_key, bob_key) = trial_keys(&config, qber, seed).unwrap();

        let mut rng = challenge_rng(seed);
        let reference = reconcile(&alice_key, &bob_key, &config, &mut rng).unwrap();

        let (listener, addr) = open_listener("127.0.0.1:0").unwrap();
        let bob_key_clone = bob_key.clone();
        let bob = thread::spawn(move || {
            let stream = accept_one(&listener)?;
            let mut unused = SeededRng::new(0);
            run_peer_tcp(Role::Bob, stream, &config, &bob_key_clone, &mut unused, 0)
        });
        let stream = connect_retry(&addr.to_string(), 10, Duration::from_millis(20)).unwrap();
        let mut challenges = challenge_rng(seed);
        let alice_report = run_peer_tcp(
            Role::Alice,
            stream,
            &config,
            &alice_key,
            &mut challenges,
            session_id(seed),
        )
        .unwrap();
        let bob_report = bob.join().unwrap().unwrap();

        if alice_report != reference || bob_report != reference {
            report_mismatches += 1;
        }
    }

    // Part 2: frame codec identity on 10^4 fuzzed messages.
    let mut rng = SeededRng::new(0xF2A2E);
    let mut frame_mismatches = 0u32;
    for _ in 0..10_000 {
        let message = random_message(&mut rng);
        let frame = encode_frame(&message).unwrap();
        if decode_frame(&frame).unwrap() != message {
            frame_mismatches += 1;
        }
    }

    report(
        "8 transport equivalence",
        report_mismatches == 0 && frame_mismatches == 0,
        &format!(
            "{report_mismatches} report mismatches over 50 loopback sessions, \
             {frame_mismatches} codec mismatches over 10^4 fuzzed frames"
        ),
    );
}

#[test]
fn criterion_09_determinism() {
    let mut qber_spec = SweepSpec::qber_sweep(vec![0.01, 0.05]);
    qber_spec.trials_per_point = 50;
    let mut range_spec = SweepSpec::range_sweep(0.1, &[8, 16]);
    range_spec.trials_per_point = 25;

    let mut stable = true;
    for spec in [qber_spec, range_spec] {
        let serial = with_thread_limit(1, || run_sweep(&spec)).unwrap().unwrap();
        let serial_again = with_thread_limit(1, || run_sweep(&spec)).unwrap().unwrap();
        let parallel = with_thread_limit(4, || run_sweep(&spec)).unwrap().unwrap();
        let csv = render_csv(&serial);
        let json = render_json(&serial);
        stable &= csv == render_csv(&serial_again) && json == render_json(&serial_again);
        stable &= csv == render_csv(&parallel) && json == render_json(&parallel);
    }

    report(
        "9 determinism",
        stable,
        "CSV and JSON byte-identical across repetition and across 1 vs 4 worker threads",
    );
}

#[test]
fn criterion_10_adversary_sanity() {
    let config = SessionConfig {
        record_transcript: true,
        ..SessionConfig::default()
    };
    let sessions = 100u32;
    let qber = 0.01;
    let mut legitimate_successes = 0u32;
    let mut eve_synchronizations = 0u32;
    for trial in 0..sessions {
        let seed = trial_seed(0, 100, trial);
        let (alice_key, bob_key) = trial_keys(&config, qber, seed).unwrap();
        let mut rng = challenge_rng(seed);
        let (session_report, alice, _) =
            reconcile_detailed(&alice_key, &bob_key, &config, &mut rng).unwrap();
        if session_report.success {
            legitimate_successes += 1;
        }
        let record =
            SessionRecord::new(config, alice.weights(), session_report.transcript.unwrap())
                .unwrap();
        let eve = record.replay(trial_seed(0xE5E, 0, trial)).unwrap();
        if eve.synchronized {
            eve_synchronizations += 1;
        }
    }
    let legitimate_rate = f64::from(legitimate_successes) / f64::from(sessions);
    let eve_rate = f64::from(eve_synchronizations) / f64::from(sessions);

    println!(
        "  legitimate success rate {legitimate_rate:.2} \
         ({legitimate_successes}/{sessions}), \
         Eve full-synchronization rate {eve_rate:.2} \
         ({eve_synchronizations}/{sessions}) at QBER {qber}"
    );
    report(
        "10 adversary sanity",
        eve_rate < legitimate_rate,
        &format!(
            "Eve full-sync rate {eve_rate:.2} strictly below legitimate success rate \
             {legitimate_rate:.2} over {sessions} recorded sessions"
        ),
    );
}
