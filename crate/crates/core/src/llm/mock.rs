use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Draw, Generator, GeneratorError, PromptBundle, Provenance, Response};
use crate::td3::derive_seed;

const STREAM_MOCK: u64 = 40;

/// Hand-written responses for the 4-dimensional maze observation. Entry 6 is
/// malformed, entry 7 evaluates to NaN on every state, entry 8 lacks a reward
/// section.
pub const MOCK_POOL: [&str; 9] = [
    // 0: distance to the target
    "The distance to the target is what the reward measures, so expose it directly.\n\n\
```dsl\n\
repr:\n\
out: sqrt((s[0] - s[2])^2 + (s[1] - s[3])^2)\n\
reward:\n\
out: -s[4]\n\
```\n",
    // 1: relative offsets
    "Offsets from the agent to the target make the goal direction explicit.\n\n\
```dsl\n\
repr:\n\
out: s[2] - s[0]\n\
out: s[3] - s[1]\n\
reward:\n\
out: -(abs(s[4]) + abs(s[5]))\n\
```\n",
    // 2: direction cosines plus distance
    "A unit vector towards the target and the remaining distance.\n\n\
```dsl\n\
repr:\n\
out: (s[2] - s[0]) / sqrt((s[2] - s[0])^2 + (s[3] - s[1])^2)\n\
out: (s[3] - s[1]) / sqrt((s[2] - s[0])^2 + (s[3] - s[1])^2)\n\
out: sqrt((s[2] - s[0])^2 + (s[3] - s[1])^2)\n\
reward:\n\
out: -s[6]\n\
```\n",
    // 3: squared distance, an energy-like quadratic
    "Squared distance behaves like a potential energy around the target.\n\n\
```dsl\n\
repr:\n\
out: (s[0] - s[2])^2 + (s[1] - s[3])^2\n\
reward:\n\
out: -0.01 * s[4]\n\
```\n",
    // 4: sum of absolute offsets and a squashed version
    "Manhattan distance and a bounded variant of it.\n\n\
```dsl\n\
repr:\n\
out: abs(s[2] - s[0]) + abs(s[3] - s[1])\n\
out: tanh(0.25 * (abs(s[2] - s[0]) + abs(s[3] - s[1])))\n\
reward:\n\
out: -s[5]\n\
```\n",
    // 5: trigonometric encoding of the offsets
    "Periodic encodings of the offsets plus the distance.\n\n\
```dsl\n\
repr:\n\
out: sin(0.3 * (s[2] - s[0]))\n\
out: sin(0.3 * (s[3] - s[1]))\n\
out: sqrt((s[2] - s[0])^2 + (s[3] - s[1])^2)\n\
reward:\n\
out: 0.5 * (s[4] + s[5]) - 0.1 * s[6]\n\
```\n",
    // 6: syntax error (unclosed parenthesis)
    "Distance feature.\n\n\
```dsl\n\
repr:\n\
out: sqrt((s[0] - s[2])^2 + (s[1] - s[3])^2\n\
reward:\n\
out: -s[4]\n\
```\n",
    // 7: overflows to inf - inf = NaN
    "A sharply growing contrast between the coordinates.\n\n\
```dsl\n\
repr:\n\
out: exp(exp(s[0] + 10)) - exp(exp(s[2] + 10))\n\
reward:\n\
out: -s[4]\n\
```\n",
    // 8: no reward section
    "Only a representation this time.\n\n\
```dsl\n\
repr:\n\
out: s[2] - s[0]\n\
```\n",
];

/// Canned analysis returned for every feedback prompt.
pub const MOCK_ANALYSIS: &str = "\
Analysis (offline mock): candidates whose added dimensions track the distance to the target \
tend to score best, and their Lipschitz constants with respect to the reward stay small. \
Candidates that failed validation or produced non-finite values should be replaced. \
Suggestion: keep a distance-like feature, add smooth direction information, and keep the \
intrinsic reward a smooth function of the added dimensions.";

/// Offline generator drawing from [`MOCK_POOL`].
///
/// Each iteration shuffles the pool with a generator keyed by `(seed, iteration)`;
/// slot `k`, attempt `a` takes entry `(k + 4a) mod len` of that order. A fixed
/// schedule of pool indices can be supplied instead.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    seed: u64,
    schedule: Option<Vec<usize>>,
    calls: usize,
}

impl MockGenerator {
    pub fn new(seed: u64) -> Self {
        MockGenerator {
            seed,
            schedule: None,
            calls: 0,
        }
    }

    /// Serves pool entries in exactly this order, cycling.
    pub fn with_schedule(schedule: Vec<usize>) -> Self {
        assert!(!schedule.is_empty(), "empty schedule");
        assert!(
            schedule.iter().all(|&i| i < MOCK_POOL.len()),
            "index out of pool"
        );
        MockGenerator {
            seed: 0,
            schedule: Some(schedule),
            calls: 0,
        }
    }

    pub fn pool_index(&self, draw: Draw) -> usize {
        let mut order: Vec<usize> = (0..MOCK_POOL.len()).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(self.seed, STREAM_MOCK, draw.iteration as u64));
        order.shuffle(&mut rng);
        order[(draw.slot + 4 * draw.attempt) % order.len()]
    }
}

impl Generator for MockGenerator {
    fn generate(&mut self, _prompt: &PromptBundle, draw: Draw) -> Result<Response, GeneratorError> {
        let index = match &self.schedule {
            Some(s) => s[self.calls % s.len()],
            None => self.pool_index(draw),
        };
        self.calls += 1;
        Ok(Response {
            text: MOCK_POOL[index].to_string(),
            provenance: Provenance::Mock { pool_index: index },
        })
    }

    fn analyze(
        &mut self,
        _prompt: &PromptBundle,
        _iteration: usize,
    ) -> Result<String, GeneratorError> {
        Ok(MOCK_ANALYSIS.to_string())
    }

    fn describe(&self) -> String {
        match &self.schedule {
            Some(s) => format!("mock (schedule {s:?})"),
            None => format!("mock (seed {})", self.seed),
        }
    }
}
