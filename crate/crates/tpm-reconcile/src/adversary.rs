//! The naive passive eavesdropper.
//!
//! Eve sees everything that crosses the classical channel — every
//! input vector and both output bits — but holds no key material, so
//! her TPM starts from uniformly random weights. Her best naive move
//! is to mimic the parties: whenever a transcript entry shows a match
//! (the moment both parties train), she trains too, provided her own
//! output agrees with theirs; on disagreement she cannot tell which
//! hidden units to move, exactly like an outsider in the mutual-
//! learning literature. Her update rule is the very same
//! [`crate::tpm::train`] the parties run — she gets no privileged
//! dynamics, only less information.

use serde::{Deserialize, Serialize};

use crate::channel::{SeededRng, STREAM_EVE};
use crate::error::{Error, Result};
use crate::session::{SessionConfig, TranscriptEntry};
use crate::tpm::{self, LearningRule, TpmParams, WeightMatrix};

/// Outcome of one replayed eavesdropping attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveReport {
    /// True when Eve's final weights equal Alice's final weights.
    pub synchronized: bool,
    /// Fraction of weight entries agreeing with Alice's at session
    /// end, in [0, 1]; `synchronized` implies 1.0.
    pub overlap: f64,
    /// Number of transcript entries Eve observed.
    pub iterations_observed: u64,
}

/// Eve's initial weights: uniform on [−L, L−1], drawn row-major from
/// the dedicated adversary substream of `eve_seed`.
pub fn eve_initial(params: &TpmParams, eve_seed: u64) -> Result<WeightMatrix> {
    TpmParams::new(
        params.hidden_units,
        params.inputs_per_unit,
        params.half_width,
        params.rule,
    )?;
    let mut rng = SeededRng::stream(eve_seed, STREAM_EVE);
    let values: Vec<i32> = (0..params.weight_count())
        .map(|_| rng.weight(params.half_width))
        .collect();
    WeightMatrix::from_values(
        params.hidden_units,
        params.inputs_per_unit,
        params.half_width,
        values,
    )
}

/// Replays a public transcript over `initial`, training on every
/// matched entry whose public output agrees with this network's own.
///
/// This is the naive strategy applied to an arbitrary starting point;
/// [`passive_attack`] wires it to a random draw. It is also the
/// white-box oracle: replaying from a copy of Alice's *initial*
/// weights must land exactly on her final weights, because such a
/// third network trains at the same moments with the same updates.
pub fn replay_transcript(
    initial: WeightMatrix,
    transcript: &[TranscriptEntry],
    rule: LearningRule,
) -> Result<WeightMatrix> {
    let mut weights = initial;
    for entry in transcript {
        let eval = tpm::evaluate(&weights, &entry.input)?;
        if entry.matched && eval.output == entry.tau_alice {
            weights = tpm::train(&weights, &entry.input, &eval, rule)?;
        }
    }
    Ok(weights)
}

/// Fraction of positions where two same-shape matrices agree.
pub fn overlap(a: &WeightMatrix, b: &WeightMatrix) -> Result<f64> {
    if a.hidden_units() != b.hidden_units() || a.inputs_per_unit() != b.inputs_per_unit() {
        return Err(Error::InvalidParameter(
            "overlap requires matrices of identical shape".into(),
        ));
    }
    let equal = a
        .values()
        .iter()
        .zip(b.values())
        .filter(|(x, y)| x == y)
        .count();
    Ok(equal as f64 / a.values().len() as f64)
}

/// Runs the naive passive attack against one recorded session.
///
/// `alice_final` is the measurement's ground truth — Alice's weights
/// when the session ended. Eve never sees it; it only scores her.
pub fn passive_attack(
    transcript: &[TranscriptEntry],
    params: &TpmParams,
    eve_seed: u64,
    alice_final: &WeightMatrix,
) -> Result<EveReport> {
    if !alice_final.matches(params) {
        return Err(Error::InvalidParameter(
            "alice_final does not match the session parameters".into(),
        ));
    }
    let initial = eve_initial(params, eve_seed)?;
    let final_weights = replay_transcript(initial, transcript, params.rule)?;
    let synchronized = tpm::weights_equal(&final_weights, alice_final)?;
    let overlap = overlap(&final_weights, alice_final)?;
    debug_assert!(!synchronized || overlap == 1.0);
    Ok(EveReport {
        synchronized,
        overlap,
        iterations_observed: transcript.len() as u64,
    })
}

/// Everything needed to re-run an eavesdropper against a finished
/// session: the agreed config, Alice's final weights as ground truth,
/// and the public transcript (possibly empty, for sessions that
/// synchronized on the spot).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    /// The session's agreed configuration.
    pub config: SessionConfig,
    /// Alice's final weights, row-major.
    pub alice_final: Vec<Vec<i32>>,
    /// The public exchange; an empty list is a valid record of a
    /// zero-iteration session.
    pub transcript: Vec<TranscriptEntry>,
}

impl SessionRecord {
    /// Captures a finished session.
    pub fn new(
        config: SessionConfig,
        alice_final: &WeightMatrix,
        transcript: Vec<TranscriptEntry>,
    ) -> Result<Self> {
        let record = SessionRecord {
            config,
            alice_final: alice_final.to_rows(),
            transcript,
        };
        record.validate()?;
        Ok(record)
    }

    /// Checks internal consistency: a valid config, weights matching
    /// its geometry and range, and a well-formed transcript.
    pub fn validate(&self) -> Result<()> {
        self.config.validate().map_err(record_error)?;
        let weights = self.alice_weights()?;
        if !weights.matches(&self.config.params) {
            return Err(Error::Record(
                "alice_final does not match the recorded parameters".into(),
            ));
        }
        let entry_count = self.config.params.weight_count();
        for (position, entry) in self.transcript.iter().enumerate() {
            if entry.input.len() != entry_count {
                return Err(Error::Record(format!(
                    "transcript entry {position} carries {} input entries, expected {entry_count}",
                    entry.input.len()
                )));
            }
            if entry.iteration_index != position as u64 + 1 {
                return Err(Error::Record(format!(
                    "transcript entry {position} numbers itself {}, expected {}",
                    entry.iteration_index,
                    position + 1
                )));
            }
            if entry.trained && !entry.matched {
                return Err(Error::Record(format!(
                    "transcript entry {position} claims training without a match"
                )));
            }
        }
        Ok(())
    }

    /// Alice's final weights as a matrix.
    pub fn alice_weights(&self) -> Result<WeightMatrix> {
        WeightMatrix::from_rows(&self.alice_final, self.config.params.half_width)
            .map_err(record_error)
    }

    /// Replays the naive passive attack against this record.
    pub fn replay(&self, eve_seed: u64) -> Result<EveReport> {
        self.validate()?;
        let alice = self.alice_weights()?;
        passive_attack(&self.transcript, &self.config.params, eve_seed, &alice)
    }

    /// Serializes the record as pretty-printed JSON.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("session records always serialize");
        out.push('\n');
        out
    }

    /// Parses and validates a record; malformed JSON, missing fields
    /// (including an absent transcript), and inconsistent contents all
    /// fail with [`Error::Record`].
    pub fn from_json(text: &str) -> Result<Self> {
        let record: SessionRecord = serde_json::from_str(text)
            .map_err(|e| Error::Record(format!("invalid session record: {e}")))?;
        record.validate()?;
        Ok(record)
    }
}

/// Wraps any error as a record error, preserving the message.
fn record_error(e: Error) -> Error {
    Error::Record(e.to_string())
}
