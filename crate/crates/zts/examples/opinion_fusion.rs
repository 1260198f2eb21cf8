//! Binomial opinions, their projected probabilities, and the two fusion
//! operators: weighted fusion for entity scores, cumulative fusion for risk.
//!
//! Run with `cargo run --example opinion_fusion`.

use zts::zts_core::opinion::{cumulative_fusion, weighted_fusion, EvidencePair, Opinion};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let password = Opinion::new(0.2, 0.6, 0.2, 0.5)?;
    let certificate = Opinion::new(0.75, 0.0, 0.25, 0.5)?;
    let unknown = Opinion::vacuous(0.5)?;
    for (name, o) in [("password", password), ("certificate", certificate), ("unknown", unknown)] {
        println!("{name:<12} {o}  P = {:.3}", o.projected_probability());
    }

    // Weighted fusion averages confidence-weighted beliefs; a vacuous
    // opinion carries no confidence and leaves the result unchanged.
    let entity = weighted_fusion(&[password, certificate])?;
    let with_unknown = weighted_fusion(&[password, certificate, unknown])?;
    println!("\nweighted fusion      {entity}  P = {:.3}", entity.projected_probability());
    println!("  ...plus a vacuous  {with_unknown}  P = {:.3}", with_unknown.projected_probability());

    // Cumulative fusion accumulates evidence: two independent "outdated"
    // reports are more certain than one.
    let outdated = Opinion::new(0.0, 0.8, 0.2, 0.5)?;
    let twice = cumulative_fusion(&[outdated, outdated])?;
    println!("\none outdated report  {outdated}  u = {:.3}", outdated.uncertainty());
    println!("two reports          {twice}  u = {:.3}", twice.uncertainty());

    // Opinions map one-to-one onto positive/negative evidence counts.
    let evidence = outdated.to_evidence()?;
    println!("\nevidence r = {}, s = {}", evidence.positive, evidence.negative);
    let summed = EvidencePair::new(2.0 * evidence.positive, 2.0 * evidence.negative)?;
    println!("doubled evidence     {}", Opinion::from_evidence(summed, 0.5)?);
    Ok(())
}
