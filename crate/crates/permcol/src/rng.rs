use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 step; the standard finalizer used to stretch one 64-bit seed
/// into independent words.
fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    *state = z ^ (z >> 31);
}

fn stream_key(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        splitmix64(&mut state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Single stream for one seed.
pub fn seed_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(stream_key(seed))
}

/// Independent stream for trial `t` under `master_seed`. Trials can then run
/// in any order or in parallel and still reproduce bit-identically.
pub fn trial_rng(master_seed: u64, t: u64) -> ChaCha12Rng {
    let mut state = master_seed ^ t.wrapping_mul(0xA24B_AED4_963E_E407);
    splitmix64(&mut state);
    ChaCha12Rng::from_seed(stream_key(state))
}

/// Derives a fresh master seed for a labeled sub-experiment, so nested runs
/// (one Monte Carlo sweep per curve point, say) do not share trial streams.
/// The extra mixing round keeps derived masters off the trial-stream lattice.
pub fn derive_seed(master_seed: u64, label: u64) -> u64 {
    let mut state = master_seed ^ label.wrapping_mul(0x9E6D_62D0_6F6A_9A9B);
    splitmix64(&mut state);
    splitmix64(&mut state);
    state
}
