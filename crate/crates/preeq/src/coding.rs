//! Terminated non-systematic convolutional code, rate 1/2, memory 2,
//! generators 05 and 07 (octal), with a hard-decision Viterbi decoder and
//! a brute-force maximum-likelihood reference decoder for tests.
//!
//! Register orientation: the generator taps act on `[u, d1, d2]` read
//! MSB-first, so `g0 = 101` taps the current bit and the oldest delay,
//! `g1 = 111` taps all three. Output order per input bit is g0 then g1.
//! Encoding appends two zero tail bits, so a `k`-bit info word produces
//! `N = 2(k + 2)` coded bits and the trellis starts and ends in state 0.

use crate::ofdm::BitBlock;
use crate::{Error, Result};

/// Encoder memory (number of delay elements).
pub const MEMORY: usize = 2;
/// Number of trellis states.
pub const NUM_STATES: usize = 1 << MEMORY;
/// Viterbi traceback window, 5 * (memory + 1).
pub const TRACEBACK_LEN: usize = 5 * (MEMORY + 1);
/// Default info word length; gives a 128-bit codeword, i.e. exactly one
/// OFDM frame of 64 QPSK symbols.
pub const DEFAULT_K: usize = 62;

/// Information bit sequence.
pub type InfoWord = BitBlock;
/// Coded bit sequence.
pub type Codeword = BitBlock;

/// Traceback strategy of [`viterbi_decode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traceback {
    /// Release decisions from the best current state once they are older
    /// than [`TRACEBACK_LEN`]; flush the tail from the zero state.
    Windowed,
    /// Single traceback from the zero terminal state.
    FullBlock,
}

/// Codeword length for `k` information bits.
pub fn codeword_len(k: usize) -> usize {
    2 * (k + MEMORY)
}

/// Info word length for an `n`-bit codeword, if valid.
pub fn info_len(n: usize) -> Result<usize> {
    if n % 2 != 0 || n / 2 < MEMORY {
        return Err(Error::InvalidCodewordLength {
            len: n,
            min: 2 * MEMORY,
        });
    }
    Ok(n / 2 - MEMORY)
}

#[inline]
fn branch_outputs(state: usize, input: u8) -> (u8, u8) {
    let d1 = (state >> 1) as u8;
    let d2 = (state & 1) as u8;
    (input ^ d2, input ^ d1 ^ d2)
}

#[inline]
fn next_state(state: usize, input: u8) -> usize {
    ((input as usize) << 1) | (state >> 1)
}

/// Shift-register encoding with two zero tail bits appended.
pub fn encode(info: &InfoWord) -> Codeword {
    let mut out = Vec::with_capacity(codeword_len(info.len()));
    let mut state = 0usize;
    for &u in info.bits().iter().chain([0u8; MEMORY].iter()) {
        let (c0, c1) = branch_outputs(state, u);
        out.push(c0);
        out.push(c1);
        state = next_state(state, u);
    }
    BitBlock::new(out).expect("encoder emits binary bits")
}

/// Re-encoding of a decoded info word; identical to [`encode`], named to
/// mirror its place in the label-recovery pipeline.
pub fn reencode(decoded: &InfoWord) -> Codeword {
    encode(decoded)
}

/// Minimum-Hamming-distance decoding over the 4-state trellis.
///
/// The trellis starts and ends in state 0 (termination known). Tail bits
/// are stripped from the output. Returns the decoded info word and the
/// terminal path metric, which for a terminated trellis is the ML metric.
pub fn viterbi_decode_with_metric(
    received: &Codeword,
    mode: Traceback,
) -> Result<(InfoWord, usize)> {
    let k = info_len(received.len())?;
    let steps = k + MEMORY;
    let bits = received.bits();

    const INF: u32 = u32::MAX / 2;
    let mut metrics = [INF; NUM_STATES];
    metrics[0] = 0;
    // survivors[t][s] = predecessor state of s at time t+1.
    let mut survivors = vec![[0u8; NUM_STATES]; steps];
    // states_at[t][s]: whether state s is reachable at time t.
    for (t, surv) in survivors.iter_mut().enumerate() {
        let r0 = bits[2 * t];
        let r1 = bits[2 * t + 1];
        let mut next = [INF; NUM_STATES];
        for state in 0..NUM_STATES {
            if metrics[state] >= INF {
                continue;
            }
            // Tail steps only admit input 0.
            let inputs: &[u8] = if t < k { &[0, 1] } else { &[0] };
            for &u in inputs {
                let (c0, c1) = branch_outputs(state, u);
                let cost = (c0 ^ r0) as u32 + (c1 ^ r1) as u32;
                let ns = next_state(state, u);
                let m = metrics[state] + cost;
                // Ties prefer the lower predecessor state index; both
                // branches into a state carry the same input bit, so this
                // fixes a deterministic survivor.
                if m < next[ns] || (m == next[ns] && (state as u8) < surv[ns]) {
                    next[ns] = m;
                    surv[ns] = state as u8;
                }
            }
        }
        metrics = next;
    }

    let terminal_metric = metrics[0] as usize;

    // Trace the full survivor path from a chosen state at a chosen time
    // back to time 0, returning the state sequence.
    let trace = |survivors: &[[u8; NUM_STATES]], end_time: usize, end_state: usize| -> Vec<usize> {
        let mut states = vec![0usize; end_time + 1];
        states[end_time] = end_state;
        for t in (0..end_time).rev() {
            states[t] = survivors[t][states[t + 1]] as usize;
        }
        states
    };

    let mut decisions = vec![0u8; steps];
    match mode {
        Traceback::FullBlock => {
            let states = trace(&survivors, steps, 0);
            for t in 0..steps {
                decisions[t] = (states[t + 1] >> 1) as u8;
            }
        }
        Traceback::Windowed => {
            // Re-run metrics to know the best state at each intermediate
            // time; cheap for the 4-state trellis.
            let mut m = [INF; NUM_STATES];
            m[0] = 0;
            for t in 0..steps {
                let r0 = bits[2 * t];
                let r1 = bits[2 * t + 1];
                let mut next = [INF; NUM_STATES];
                for state in 0..NUM_STATES {
                    if m[state] >= INF {
                        continue;
                    }
                    let inputs: &[u8] = if t < k { &[0, 1] } else { &[0] };
                    for &u in inputs {
                        let (c0, c1) = branch_outputs(state, u);
                        let cost = (c0 ^ r0) as u32 + (c1 ^ r1) as u32;
                        let ns = next_state(state, u);
                        next[ns] = next[ns].min(m[state] + cost);
                    }
                }
                m = next;
                let now = t + 1;
                if now >= TRACEBACK_LEN && now < steps {
                    // Release the decision that just left the window,
                    // tracing back from the currently best state.
                    let best = (0..NUM_STATES).min_by_key(|&s| m[s]).unwrap();
                    let states = trace(&survivors, now, best);
                    let release = now - TRACEBACK_LEN;
                    decisions[release] = (states[release + 1] >> 1) as u8;
                }
            }
            // Final flush from the known zero terminal state covers the
            // last window (and everything, for short blocks).
            let states = trace(&survivors, steps, 0);
            let flush_from = steps.saturating_sub(TRACEBACK_LEN);
            for t in flush_from..steps {
                decisions[t] = (states[t + 1] >> 1) as u8;
            }
        }
    }

    decisions.truncate(k);
    Ok((BitBlock::new(decisions).unwrap(), terminal_metric))
}

/// Windowed-traceback Viterbi decoding (the default operating mode).
pub fn viterbi_decode(received: &Codeword) -> Result<InfoWord> {
    viterbi_decode_with_metric(received, Traceback::Windowed).map(|(u, _)| u)
}

/// Exhaustive maximum-likelihood decoding over all `2^k` info words.
/// Ties resolve to the smallest info word read as an MSB-first integer.
/// Test oracle; limited to `k <= 14`.
pub fn ml_decode_bruteforce(received: &Codeword) -> Result<(InfoWord, usize)> {
    let k = info_len(received.len())?;
    if k > 14 {
        return Err(Error::InvalidArgument(format!(
            "brute-force decoding limited to k <= 14, got k = {k}"
        )));
    }
    let mut best: Option<(usize, Vec<u8>)> = None;
    for word in 0..(1usize << k) {
        let bits: Vec<u8> = (0..k).map(|i| ((word >> (k - 1 - i)) & 1) as u8).collect();
        let info = BitBlock::new(bits.clone()).unwrap();
        let metric = encode(&info).hamming(received);
        // Strictly-less keeps the smallest integer on ties because words
        // are enumerated in increasing order.
        if best.as_ref().map_or(true, |(m, _)| metric < *m) {
            best = Some((metric, bits));
        }
    }
    let (metric, bits) = best.unwrap();
    Ok((BitBlock::new(bits).unwrap(), metric))
}
