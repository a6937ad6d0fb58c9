use adversim_train::td3::learner_rng;
use adversim_train::{ReplayBuffer, Td3, Td3Config, Transition};
use rand::Rng;

/// 1-D approach to a wall: reward for speed, large penalty for reaching it.
struct Wall {
    gap: f32,
    v: f32,
}

const DT: f32 = 0.1;

impl Wall {
    fn obs(&self) -> Vec<f32> {
        vec![self.gap / 20.0, self.v / 10.0]
    }

    /// Returns (reward, crashed).
    fn step(&mut self, a: f32) -> (f32, bool) {
        self.v = (self.v + 3.0 * a.clamp(-1.0, 1.0) * DT).max(0.0);
        self.gap -= self.v * DT;
        if self.gap <= 0.0 {
            (-10.0, true)
        } else {
            (0.05 * self.v * DT, false)
        }
    }
}

fn crashes(td3: &Td3, starts: &[(f32, f32)]) -> usize {
    starts
        .iter()
        .filter(|(g, v)| {
            let mut w = Wall { gap: *g, v: *v };
            (0..150).any(|_| w.step(td3.act(&w.obs())[0]).1)
        })
        .count()
}

#[test]
fn learns_to_stop_before_the_wall() {
    let cfg = Td3Config {
        explore_noise: 0.0,
        random_steps: 0,
        learning_starts: 500,
        ..Default::default()
    };
    let mut rng = learner_rng(7, 0);
    let mut td3 = Td3::new(2, 1, cfg, &mut rng);
    let mut buf = ReplayBuffer::new(100_000);
    let starts: Vec<(f32, f32)> = (0..10).map(|i| (10.0 + 2.0 * i as f32, 2.0 + 0.5 * i as f32)).collect();
    let mut steps = 0;
    let mut clean_at = None;
    while steps < 50_000 {
        // Random starting conditions, uniform random actions for the first
        // episodes so the wall is discovered without exploration noise.
        let mut w = Wall {
            gap: rng.random_range(8.0..30.0),
            v: rng.random_range(0.0..8.0),
        };
        for _ in 0..150 {
            let o = w.obs();
            let a = if steps < 2_000 { rng.random_range(-1.0..1.0) } else { td3.act(&o)[0] };
            let (r, done) = w.step(a);
            buf.push(Transition {
                obs: o,
                action: vec![a],
                reward: r,
                next_obs: w.obs(),
                done,
            });
            steps += 1;
            if steps >= 500 {
                td3.update(&buf, &mut rng);
            }
            if done {
                break;
            }
        }
        if steps >= 5_000 && crashes(&td3, &starts) == 0 {
            clean_at = Some(steps);
            break;
        }
    }
    assert!(clean_at.is_some(), "still crashing after {steps} steps");
}
