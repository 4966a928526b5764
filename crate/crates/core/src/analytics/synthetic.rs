//! Seeded synthetic study data (22 participants, 11 per group) for demos and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::survey::{self, MetricsRecord};

pub const PARTICIPANTS: usize = 22;

pub struct SyntheticStudy {
    pub surveys_csv: String,
    pub metrics_csv: String,
}

fn likert(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> u32 {
    rng.gen_range(lo..=hi)
}

pub fn generate(seed: u64) -> SyntheticStudy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut surveys = String::from("participant,group,phase,instrument,item1,item2,item3,item4,item5,item6\n");
    let mut metrics = Vec::new();
    for i in 0..PARTICIPANTS {
        let id = format!("P{:02}", i + 1);
        let (group, condition) = if i % 2 == 0 {
            ("control", "control")
        } else {
            ("experimental", "cpg")
        };
        let pre: Vec<u32> = (0..6).map(|_| likert(&mut rng, 1, 3)).collect();
        let post: Vec<u32> = pre
            .iter()
            .map(|&p| (p + likert(&mut rng, 0, 2)).min(5))
            .collect();
        let tlx: Vec<u32> = (0..6).map(|_| rng.gen_range(10..=90)).collect();
        let sat: Vec<u32> = (0..4).map(|_| likert(&mut rng, 2, 5)).collect();
        let join = |xs: &[u32]| xs.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        surveys.push_str(&format!("{id},{group},pre,self-efficacy,{}\n", join(&pre)));
        surveys.push_str(&format!("{id},{group},post,self-efficacy,{}\n", join(&post)));
        surveys.push_str(&format!("{id},{group},post-only,nasa-tlx,{}\n", join(&tlx)));
        surveys.push_str(&format!("{id},{group},post-only,satisfaction,{},,\n", join(&sat)));
        metrics.push(MetricsRecord {
            session: format!("session-{id}"),
            condition: condition.into(),
            task_time_secs: f64::from(rng.gen_range(240u32..=1500)),
            interaction_count: rng.gen_range(4..=20),
            completed: rng.gen_bool(0.9),
        });
    }
    SyntheticStudy {
        surveys_csv: surveys,
        metrics_csv: survey::write_metrics(&metrics),
    }
}
