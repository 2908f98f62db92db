//! Three seeded train/dev/test runs that keep translation pairs together.
//!
//! `cargo run -p agenda-core --example split_runs`

use agenda_core::{make_runs, Dataset, LabelSchema, Message, Partition};

fn main() -> agenda_core::Result<()> {
    let schema = LabelSchema::agenda_default();
    let labels: Vec<&str> = schema.ids().collect();
    let mut msgs = Vec::new();
    for i in 0..60 {
        let gold = labels[i % labels.len()];
        let en = Message::new(format!("en{i}"), format!("message {i}"), "en").with_gold([gold]);
        if i % 3 == 0 {
            msgs.push(en.with_pair(format!("p{i}")));
            msgs.push(Message::new(format!("fr{i}"), format!("message {i} (fr)"), "fr").with_gold([gold]).with_pair(format!("p{i}")));
        } else {
            msgs.push(en);
        }
    }
    let ds = Dataset::new(msgs, &schema)?;

    for run in make_runs(&ds, &[1, 2, 3])? {
        let test = run.ids(Partition::Test);
        let split_pairs = test
            .iter()
            .filter(|id| ds.counterpart(id).is_some_and(|c| !test.contains(&c.id)))
            .count();
        println!(
            "{}: train {:>2}  dev {:>2}  test {:>2}  pairs split across partitions: {split_pairs}",
            run.run_id,
            run.train.len(),
            run.dev.len(),
            test.len()
        );
    }
    Ok(())
}
