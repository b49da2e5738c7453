//! Privacy-preserving FLD: clients encrypt under the cloud platform's
//! Paillier key, the server masks, the platform scores, and the server
//! aggregates benign ciphertexts. The result is compared with plaintext FLD.

use std::time::Instant;

use fedsieve::defense::{fld_aggregate, Submission};
use fedsieve::model::{init_model, ArchSpec};
use fedsieve::private::{private_fld, CloudPlatform};

fn main() -> fedsieve::Result<()> {
    let bits = std::env::args()
        .nth(1)
        .map_or(Ok(512), |b| b.parse())
        .expect("key size in bits");
    let start = Instant::now();
    let cp = CloudPlatform::generate(bits, 5)?;
    println!("{bits}-bit key in {:.2}s", start.elapsed().as_secs_f64());

    let arch = ArchSpec::flat(&[6, 3, 4, 2]);
    let base = init_model(&arch, 0)?;
    let subs: Vec<Submission> = (0..8)
        .map(|i| {
            let shift = if i == 7 { 1.5 } else { 0.0 };
            let flat: Vec<f64> = init_model(&arch, 100 + u64::from(i))?
                .flatten()
                .iter()
                .zip(base.flatten())
                .map(|(v, b)| b + 0.05 * v + shift)
                .collect();
            Ok(Submission {
                client_id: i,
                params: base.with_flat(&flat)?,
            })
        })
        .collect::<fedsieve::Result<_>>()?;

    let start = Instant::now();
    let private = private_fld(&cp, &subs, 3.0, 0, 9)?;
    println!("private round in {:.2}s", start.elapsed().as_secs_f64());
    let plain = fld_aggregate(&subs, 3.0, None)?;
    println!("private benign set: {:?}", private.benign_set);
    println!("plain benign set:   {:?}", plain.benign_set);
    let dev = private
        .aggregated
        .flatten()
        .iter()
        .zip(plain.aggregated.flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max aggregate deviation: {dev:.3e}");
    Ok(())
}
