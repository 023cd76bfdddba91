//! Trains the predicate classifier on widget pairs, then ranks predicates
//! with and without a prior score channel.
//!
//! ```bash
//! cargo run -p isin --example relationships
//! ```

use isin::data::{default_schema, generate, GenConfig, Split};
use isin::eval::recall_at_k;
use isin::relationship::{
    generate_relationships, predict_relationships, train_predicate_model, PriorScores, RelateConfig, PREDICATES,
};

fn main() -> isin::Result<()> {
    let schema = default_schema();
    let samples = generate(&GenConfig { num_samples: 600, ..GenConfig::default() }, &schema)?;
    let records = generate_relationships(&samples, &schema, 0)?;
    let (train, test): (Vec<_>, Vec<_>) = records.into_iter().partition(|r| Split::of(&r.id) == Split::Train);

    let model = train_predicate_model(&train, PREDICATES.len(), &RelateConfig::default())?;
    let gt: Vec<Vec<usize>> = test.iter().map(|r| vec![r.predicate]).collect();

    // A prior that always favours "next_to", standing in for an external
    // language or spatial prior.
    let mut biased = PriorScores::default();
    for r in &test {
        for p in 0..PREDICATES.len() {
            biased.0.insert((r.id.clone(), p), if p == 3 { 3.0 } else { 0.0 });
        }
    }
    for (name, priors) in [("part states", PriorScores::default()), ("with prior", biased)] {
        let ranked = predict_relationships(&model, &test, &priors)?;
        let ids: Vec<Vec<usize>> = ranked.iter().map(|r| r.iter().map(|x| x.0).collect()).collect();
        println!(
            "{name:<12} recall@1 {:.3}  recall@2 {:.3}",
            recall_at_k(&ids, &gt, 1)?,
            recall_at_k(&ids, &gt, 2)?
        );
    }
    println!("first test pair: {:?}", test[0].id);
    for (p, score) in &predict_relationships(&model, &test[..1], &PriorScores::default())?[0] {
        println!("  {:<12} {score:+.3}", PREDICATES[*p]);
    }
    Ok(())
}
