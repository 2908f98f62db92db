#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use agenda_core::{LabelSchema, Message};

pub struct Out {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Out {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }

    pub fn error(&self) -> serde_json::Value {
        serde_json::from_str(self.stderr.trim()).unwrap_or_else(|e| panic!("{e}: {}", self.stderr))
    }
}

pub fn agenda<S: AsRef<str>>(args: &[S]) -> Out {
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let argv = std::iter::once("agenda").chain(args.iter().map(AsRef::as_ref));
    let code = agenda_cli::run_with(argv, &mut o, &mut e);
    Out {
        code,
        stdout: String::from_utf8(o).unwrap(),
        stderr: String::from_utf8(e).unwrap(),
    }
}

pub fn p(path: &Path) -> String {
    path.display().to_string()
}

/// Random labeled messages over the default schema. Every fifth message
/// starts an en/fr translation pair sharing its gold set.
pub fn labeled_messages(n: usize, seed: u64) -> Vec<Message> {
    let schema = LabelSchema::agenda_default();
    let labels: Vec<&str> = schema.ids().filter(|l| *l != schema.other_id()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let i = out.len();
        let k = rng.gen_range(0..=2);
        let gold: Vec<&str> = if k == 0 {
            vec![schema.other_id()]
        } else {
            labels.choose_multiple(&mut rng, k).copied().collect()
        };
        let text = format!("message {i} about {} number {}", gold.join(" and "), rng.gen::<u32>());
        if i % 5 == 0 && i + 1 < n {
            let pair = format!("p{i}");
            out.push(Message::new(format!("m{i:04}"), text.clone(), "en").with_gold(gold.clone()).with_pair(&pair));
            out.push(
                Message::new(format!("m{:04}", i + 1), format!("{text} (fr)"), "fr")
                    .with_gold(gold)
                    .with_pair(&pair),
            );
        } else {
            let lang = if rng.gen_bool(0.5) { "en" } else { "fr" };
            out.push(Message::new(format!("m{i:04}"), text, lang).with_gold(gold));
        }
    }
    out
}

pub fn write_messages(dir: &Path, name: &str, msgs: &[Message]) -> PathBuf {
    let path = dir.join(name);
    agenda_core::io::write_jsonl(&path, msgs).unwrap();
    path
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
