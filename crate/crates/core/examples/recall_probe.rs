//! Cued recall: prompt with the first half of each sentence, decode the rest
//! greedily and score with Rouge-L.

mod common;

use memlab::model::detokenize_ids;
use memlab::protocol::probe_recall;

fn main() -> memlab::error::Result<()> {
    let r = common::resources();
    let ck = common::model(&r);
    let items = &r.pool.items()[..20];
    let p = probe_recall(&ck.model, items)?;
    for o in p.outcomes.iter().take(5) {
        let prompt = String::from_utf8_lossy(&detokenize_ids(&o.hypothesis[..o.prompt_token_count])).into_owned();
        let completion = String::from_utf8_lossy(&detokenize_ids(&o.hypothesis[o.prompt_token_count..])).into_owned();
        println!("{:.3}  {prompt}|{completion}", o.rouge_l);
    }
    println!("mean rouge-l {:.3}, {} perfect", p.mean_rouge_l.unwrap_or(f64::NAN), p.perfect_ids.len());
    Ok(())
}
