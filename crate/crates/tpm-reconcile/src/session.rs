//! The reconciliation protocol state machine.
//!
//! Both parties build a TPM from their (errored) key bits, then repeat
//! rounds of challenge-compare-train: Alice draws a random input
//! vector, both evaluate, and when the outputs match both sides train
//! — which ends the round. After every trained round the simulator
//! checks weight identity out of band (the network peer exchanges a
//! digest instead; see [`crate::wire`]). Success decodes the now-equal
//! weights back into bits; running out of the iteration budget
//! discards the frame.

use serde::{Deserialize, Serialize};

use crate::channel::{self, SeededRng, STREAM_CHALLENGE, STREAM_KEY, STREAM_NOISE};
use crate::codec::{self, BitString};
use crate::error::{Error, Result};
use crate::metrics;
use crate::tpm::{self, Evaluation, InputVector, LearningRule, TpmParams, WeightMatrix};

/// Default iteration cap per frame.
pub const DEFAULT_MAX_ITERATIONS: u64 = 300;

/// Everything two parties must agree on before a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Network geometry and training rule.
    pub params: TpmParams,
    /// `b`: key bits per weight; must satisfy `2^(b-1) == params.half_width`.
    pub block_bits: u32,
    /// Cap on total iterations (matched and mismatched) per frame.
    pub max_iterations: u64,
    /// Whether to keep the public transcript in the report.
    pub record_transcript: bool,
}

impl SessionConfig {
    /// Validates the `b`/`L` consistency required by the codec and a
    /// positive iteration budget.
    pub fn new(
        params: TpmParams,
        block_bits: u32,
        max_iterations: u64,
        record_transcript: bool,
    ) -> Result<Self> {
        let derived = codec::derive_halfwidth(block_bits)?;
        if derived != params.half_width {
            return Err(Error::InvalidParameter(format!(
                "block size {block_bits} implies half-width {derived}, but params carry {}",
                params.half_width
            )));
        }
        if max_iterations < 1 {
            return Err(Error::InvalidParameter(
                "max_iterations must be >= 1".into(),
            ));
        }
        Ok(SessionConfig {
            params,
            block_bits,
            max_iterations,
            record_transcript,
        })
    }

    /// Re-checks the invariants, for configs read from files or wires.
    pub fn validate(&self) -> Result<()> {
        TpmParams::new(
            self.params.hidden_units,
            self.params.inputs_per_unit,
            self.params.half_width,
            self.params.rule,
        )?;
        SessionConfig::new(
            self.params,
            self.block_bits,
            self.max_iterations,
            self.record_transcript,
        )?;
        Ok(())
    }

    /// Required key length `n = b * K * N` in bits.
    pub fn key_length(&self) -> Result<usize> {
        codec::sequence_length(
            self.block_bits,
            self.params.hidden_units,
            self.params.inputs_per_unit,
        )
    }
}

impl Default for SessionConfig {
    /// The standard setup: `K = 10`, `N = 15`, `b = 4` (so `L = 8`),
    /// Hebbian training, a 300-iteration cap, and no transcript.
    fn default() -> Self {
        let params =
            TpmParams::new(10, 15, 8, LearningRule::Hebbian).expect("default parameters are valid");
        SessionConfig::new(params, 4, DEFAULT_MAX_ITERATIONS, false)
            .expect("default config is consistent")
    }
}

/// One party's mutable TPM state during a session.
#[derive(Debug, Clone, PartialEq)]
pub struct PartyState {
    weights: WeightMatrix,
    rule: LearningRule,
}

impl PartyState {
    /// Builds the initial state by encoding the party's key bits.
    pub fn from_key(key: &BitString, config: &SessionConfig) -> Result<Self> {
        let weights = codec::encode(
            key,
            config.block_bits,
            config.params.hidden_units,
            config.params.inputs_per_unit,
        )?;
        Ok(PartyState {
            weights,
            rule: config.params.rule,
        })
    }

    /// Current weights.
    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    /// Forward pass on `input`.
    pub fn evaluate(&self, input: &InputVector) -> Result<Evaluation> {
        tpm::evaluate(&self.weights, input)
    }

    /// Applies one training update with this party's own evaluation.
    pub fn apply_training(&mut self, input: &InputVector, eval: &Evaluation) -> Result<()> {
        self.weights = tpm::train(&self.weights, input, eval, self.rule)?;
        Ok(())
    }

    /// Decodes the current weights back into key bits.
    pub fn decode_bits(&self, block_bits: u32) -> Result<BitString> {
        codec::decode(&self.weights, block_bits)
    }
}

/// One iteration of the public exchange, as an eavesdropper sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// 1-based round this iteration belongs to.
    pub round_index: u64,
    /// 1-based global iteration counter.
    pub iteration_index: u64,
    /// The shared challenge.
    pub input: InputVector,
    /// Alice's output bit.
    pub tau_alice: i8,
    /// Bob's output bit.
    pub tau_bob: i8,
    /// Whether the outputs agreed.
    pub matched: bool,
    /// Whether both sides trained (implies `matched`).
    pub trained: bool,
}

/// Outcome of one reconciliation frame.
///
/// On failure the frame is discarded: the bit strings are left empty
/// so no key material outlives a failed session, and the capped
/// iteration count still enters every average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationReport {
    /// True when weight identity was reached within the budget.
    pub success: bool,
    /// Rounds run, counting a final round truncated by the cap.
    pub rounds: u64,
    /// Total iterations, matched and mismatched.
    pub total_iterations: u64,
    /// `Z = total_iterations / log2(2L + 1)`.
    pub entropy_loss: f64,
    /// Alice's decoded bits (empty when the frame was discarded).
    pub alice_bits: BitString,
    /// Bob's decoded bits (empty when the frame was discarded).
    pub bob_bits: BitString,
    /// The public exchange, when recording was requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub transcript: Option<Vec<TranscriptEntry>>,
}

/// Builds both parties' initial states from their keys.
///
/// Both keys must have exactly `b * K * N` bits.
pub fn init_session(
    alice_key: &BitString,
    bob_key: &BitString,
    config: &SessionConfig,
) -> Result<(PartyState, PartyState)> {
    config.validate()?;
    let expected = config.key_length()?;
    if alice_key.len() != expected || bob_key.len() != expected {
        return Err(Error::InvalidParameter(format!(
            "keys must be exactly {expected} bits, got {} and {}",
            alice_key.len(),
            bob_key.len()
        )));
    }
    Ok((
        PartyState::from_key(alice_key, config)?,
        PartyState::from_key(bob_key, config)?,
    ))
}

/// One challenge exchange: draw an input, evaluate both parties, and
/// train both when the outputs match.
pub fn run_iteration(
    alice: &mut PartyState,
    bob: &mut PartyState,
    rng: &mut SeededRng,
    round_index: u64,
    iteration_index: u64,
) -> Result<TranscriptEntry> {
    let entry_count = alice.weights.hidden_units() * alice.weights.inputs_per_unit();
    let input = channel::random_input(entry_count, rng)?;
    let eval_alice = alice.evaluate(&input)?;
    let eval_bob = bob.evaluate(&input)?;
    let matched = eval_alice.output == eval_bob.output;
    if matched {
        alice.apply_training(&input, &eval_alice)?;
        bob.apply_training(&input, &eval_bob)?;
    }
    Ok(TranscriptEntry {
        round_index,
        iteration_index,
        tau_alice: eval_alice.output,
        tau_bob: eval_bob.output,
        matched,
        trained: matched,
        input,
    })
}

/// One round: iterations until the first match (which trains and ends
/// the round) or until `budget` iterations have been spent.
///
/// `round_index` and `first_iteration_index` number the produced
/// entries; the caller owns the global counters.
pub fn run_round(
    alice: &mut PartyState,
    bob: &mut PartyState,
    rng: &mut SeededRng,
    budget: u64,
    round_index: u64,
    first_iteration_index: u64,
) -> Result<Vec<TranscriptEntry>> {
    if budget < 1 {
        return Err(Error::InvalidParameter("round budget must be >= 1".into()));
    }
    let mut entries = Vec::new();
    for offset in 0..budget {
        let entry = run_iteration(alice, bob, rng, round_index, first_iteration_index + offset)?;
        let done = entry.matched;
        entries.push(entry);
        if done {
            break;
        }
    }
    Ok(entries)
}

/// Runs a full frame and also returns both final party states.
///
/// [`reconcile`] is the plain variant; this one exists so the caller
/// can capture Alice's final weights, which the adversary replay needs
/// as its ground truth.
pub fn reconcile_detailed(
    alice_key: &BitString,
    bob_key: &BitString,
    config: &SessionConfig,
    rng: &mut SeededRng,
) -> Result<(ReconciliationReport, PartyState, PartyState)> {
    let (mut alice, mut bob) = init_session(alice_key, bob_key, config)?;
    let mut transcript = config.record_transcript.then(Vec::new);
    let mut total_iterations: u64 = 0;
    let mut rounds: u64 = 0;

    // Trivially-synchronized keys cost nothing: check before round 1.
    let mut synced = tpm::weights_equal(alice.weights(), bob.weights())?;

    while !synced && total_iterations < config.max_iterations {
        let budget = config.max_iterations - total_iterations;
        let entries = run_round(
            &mut alice,
            &mut bob,
            rng,
            budget,
            rounds + 1,
            total_iterations + 1,
        )?;
        rounds += 1;
        total_iterations += entries.len() as u64;
        let trained = entries.last().is_some_and(|e| e.trained);
        if let Some(t) = transcript.as_mut() {
            t.extend(entries);
        }
        if trained {
            synced = tpm::weights_equal(alice.weights(), bob.weights())?;
        }
    }

    let (alice_bits, bob_bits) = if synced {
        (
            alice.decode_bits(config.block_bits)?,
            bob.decode_bits(config.block_bits)?,
        )
    } else {
        (BitString::new(), BitString::new())
    };
    let report = ReconciliationReport {
        success: synced,
        rounds,
        total_iterations,
        entropy_loss: metrics::entropy_loss(total_iterations, config.params.half_width),
        alice_bits,
        bob_bits,
        transcript,
    };
    Ok((report, alice, bob))
}

/// Runs one reconciliation frame to completion.
pub fn reconcile(
    alice_key: &BitString,
    bob_key: &BitString,
    config: &SessionConfig,
    rng: &mut SeededRng,
) -> Result<ReconciliationReport> {
    reconcile_detailed(alice_key, bob_key, config, rng).map(|(report, _, _)| report)
}

/// Derives the two parties' keys for one trial: a fresh key from the
/// trial's key substream, and its BSC-corrupted copy from the noise
/// substream.
pub fn trial_keys(config: &SessionConfig, qber: f64, seed: u64) -> Result<(BitString, BitString)> {
    let length = config.key_length()?;
    let mut key_rng = SeededRng::stream(seed, STREAM_KEY);
    let alice_key = channel::generate_key(length, &mut key_rng)?;
    let mut noise_rng = SeededRng::stream(seed, STREAM_NOISE);
    let bob_key = channel::corrupt(&alice_key, qber, &mut noise_rng)?;
    Ok((alice_key, bob_key))
}

/// The challenge generator for one trial. In-process and networked
/// runs draw from this same substream, which is what makes their
/// transcripts identical.
pub fn challenge_rng(seed: u64) -> SeededRng {
    SeededRng::stream(seed, STREAM_CHALLENGE)
}

/// One complete Monte-Carlo trial from a single 64-bit seed.
pub fn run_trial(config: &SessionConfig, qber: f64, seed: u64) -> Result<ReconciliationReport> {
    let (alice_key, bob_key) = trial_keys(config, qber, seed)?;
    let mut rng = challenge_rng(seed);
    reconcile(&alice_key, &bob_key, config, &mut rng)
}
