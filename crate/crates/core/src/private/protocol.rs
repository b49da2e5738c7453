//! The two-party scoring protocol. Clients upload Paillier-encrypted
//! fixed-point models; the server blinds every coordinate column with one
//! shared random integer and forwards the batch; the cloud platform (CP)
//! decrypts the blinded values and runs Layer Scoring on them. Because every
//! client's coordinate `j` is shifted by the same `r_j`, pairwise distances
//! are unchanged.
//!
//! Server and CP only exchange byte messages (see [`Message`]). The CP learns
//! `w_i + r` for every client, so pairwise differences are visible to it.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::Rng;
use rayon::prelude::*;

use crate::data::ClientId;
use crate::defense::{
    anomaly_detection, score_layers, AnomalyReport, DefenseOutcome, LayerScoreMatrix, Submission,
};
use crate::error::{Error, Result};
use crate::model::LayeredParams;
use crate::outlier::DistanceMatrix;
use crate::private::codec::FixedPointCodec;
use crate::private::paillier::{keygen, Ciphertext, PaillierKeypair, PublicKey};
use crate::seed;

/// One shared blinding integer per coordinate, each in `[1, 2^32]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskVector {
    pub r: Vec<u64>,
}

pub const MASK_MAX: u64 = 1 << 32;

impl MaskVector {
    pub fn random(m: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed, &[0x6d61_736b]);
        let r = (0..m)
            .map(|_| loop {
                let v = rng.random_range(1..=MASK_MAX);
                if v != 0 {
                    break v;
                }
            })
            .collect();
        MaskVector { r }
    }
}

fn check_rectangular(rows: &[Vec<Ciphertext>]) -> Result<usize> {
    let m = rows
        .first()
        .ok_or(Error::Empty("no encrypted models"))?
        .len();
    for (row, r) in rows.iter().enumerate() {
        if r.len() != m {
            return Err(Error::Ragged {
                row,
                got: r.len(),
                expected: m,
            });
        }
    }
    Ok(m)
}

/// Multiplies column `j` of every client by `Enc(r_j)`.
pub fn mask_round(
    pk: &PublicKey,
    encrypted: &[Vec<Ciphertext>],
    seed: u64,
) -> Result<(Vec<Vec<Ciphertext>>, MaskVector)> {
    let m = check_rectangular(encrypted)?;
    let mask = MaskVector::random(m, seed);
    let masked = apply_mask(pk, encrypted, &mask, seed::derive(seed, &[0x6d65_6e63]));
    Ok((masked, mask))
}

/// Homomorphically adds `r_j` to column `j` of every row.
pub fn apply_mask(
    pk: &PublicKey,
    rows: &[Vec<Ciphertext>],
    mask: &MaskVector,
    seed: u64,
) -> Vec<Vec<Ciphertext>> {
    let enc_r: Vec<Ciphertext> = mask
        .r
        .par_iter()
        .enumerate()
        .map(|(j, &r)| pk.encrypt(&BigUint::from(r), &mut seed::rng(seed, &[j as u64])))
        .collect();
    rows.par_iter()
        .map(|row| row.iter().zip(&enc_r).map(|(c, e)| pk.add(c, e)).collect())
        .collect()
}

/// Fixed-point encodes and encrypts every coordinate of `params`.
pub fn encrypt_params(
    pk: &PublicKey,
    codec: &FixedPointCodec,
    params: &LayeredParams,
    seed: u64,
) -> Result<Vec<Ciphertext>> {
    let flat = params.flatten();
    let encoded = flat
        .iter()
        .map(|&x| codec.encode(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(encoded
        .par_iter()
        .enumerate()
        .map(|(j, m)| pk.encrypt(m, &mut seed::rng(seed, &[0x636c_6e74, j as u64])))
        .collect())
}

/// Client-side upload message.
pub fn client_upload(
    pk: &PublicKey,
    codec: &FixedPointCodec,
    client_id: ClientId,
    params: &LayeredParams,
    seed: u64,
) -> Result<Vec<u8>> {
    let ciphertexts = encrypt_params(pk, codec, params, seed)?;
    let layout = params.layout();
    Ok(Message::Upload {
        client_id,
        layout,
        ciphertexts,
    }
    .to_bytes())
}

/// What the server sends to the CP for scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedBatch {
    pub clients: Vec<ClientId>,
    /// Coordinates per layer, in order; sums to the row length.
    pub layout: Vec<usize>,
    pub rows: Vec<Vec<Ciphertext>>,
}

fn scores_from_fixed_point(
    clients: Vec<ClientId>,
    rows: &[Vec<i128>],
    layout: &[usize],
    scale: f64,
    cof_k: Option<usize>,
) -> Result<LayerScoreMatrix> {
    let mut offsets = Vec::with_capacity(layout.len());
    let mut start = 0;
    for &len in layout {
        offsets.push(start..start + len);
        start += len;
    }
    let scores = score_layers(rows.len(), layout.len(), cof_k, |j| {
        let slices: Vec<Vec<i128>> = rows
            .iter()
            .map(|r| r[offsets[j].clone()].to_vec())
            .collect();
        Ok(DistanceMatrix::fixed_point(&slices, scale))
    })?;
    Ok(LayerScoreMatrix { clients, scores })
}

fn check_layout(layout: &[usize], m: usize) -> Result<()> {
    if layout.is_empty() || layout.iter().sum::<usize>() != m {
        return Err(Error::Shape(format!(
            "layer layout {layout:?} does not partition {m} coordinates"
        )));
    }
    Ok(())
}

/// CP side: decrypt the blinded coordinates, decode them as signed
/// fixed-point integers and run Layer Scoring.
pub fn private_layer_scoring(
    keypair: &PaillierKeypair,
    codec: &FixedPointCodec,
    batch: &MaskedBatch,
    cof_k: Option<usize>,
) -> Result<LayerScoreMatrix> {
    let m = check_rectangular(&batch.rows)?;
    check_layout(&batch.layout, m)?;
    if batch.clients.len() != batch.rows.len() {
        return Err(Error::Message(format!(
            "{} client ids for {} rows",
            batch.clients.len(),
            batch.rows.len()
        )));
    }
    let rows = batch
        .rows
        .par_iter()
        .map(|row| {
            row.iter()
                .map(|c| codec.decode_i128(&keypair.decrypt(c)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    scores_from_fixed_point(
        batch.clients.clone(),
        &rows,
        &batch.layout,
        codec.scale(),
        cof_k,
    )
}

/// Plaintext reference for the private path: Layer Scoring on the same
/// fixed-point integers, without encryption or masking.
pub fn fixed_point_layer_scoring(
    codec: &FixedPointCodec,
    submissions: &[Submission],
    cof_k: Option<usize>,
) -> Result<LayerScoreMatrix> {
    let first = submissions.first().ok_or(Error::Empty("no submissions"))?;
    let rows = submissions
        .iter()
        .map(|s| {
            first.params.check_congruent(&s.params)?;
            s.params
                .flatten()
                .iter()
                .map(|&x| {
                    codec
                        .quantize(x)
                        .and_then(|v| i128::try_from(v).map_err(|_| Error::Overflow(x)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let clients = submissions.iter().map(|s| s.client_id).collect();
    scores_from_fixed_point(clients, &rows, &first.params.layout(), codec.scale(), cof_k)
}

/// Server <-> CP wire messages. Encoding: one tag byte, then fields in
/// order. Counts and ids are `u32` big-endian; big integers are a `u32`
/// byte length followed by the big-endian magnitude; reals are IEEE-754
/// bits as `u64` big-endian.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// tag 1: client id, layout, ciphertexts
    Upload {
        client_id: ClientId,
        layout: Vec<usize>,
        ciphertexts: Vec<Ciphertext>,
    },
    /// tag 2: client ids, layout, row count, rows
    Masked(MaskedBatch),
    /// tag 3: client ids, layer count, row-major scores
    Scores(LayerScoreMatrix),
    /// tag 4: blinded encrypted sums to decrypt
    SumRequest(Vec<Ciphertext>),
    /// tag 5: decrypted residues
    SumReply(Vec<BigUint>),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_be_bytes());
    }

    fn big(&mut self, v: &BigUint) {
        let bytes = v.to_bytes_be();
        self.u32(bytes.len());
        self.0.extend_from_slice(&bytes);
    }

    fn bigs<'a>(&mut self, vs: impl ExactSizeIterator<Item = &'a BigUint>) {
        self.u32(vs.len());
        for v in vs {
            self.big(v);
        }
    }

    fn usizes(&mut self, vs: &[usize]) {
        self.u32(vs.len());
        for &v in vs {
            self.u32(v);
        }
    }

    fn ids(&mut self, vs: &[ClientId]) {
        self.u32(vs.len());
        for &v in vs {
            self.u32(v as usize);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Message(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn big(&mut self) -> Result<BigUint> {
        let len = self.u32()?;
        Ok(BigUint::from_bytes_be(self.take(len)?))
    }

    fn count(&mut self) -> Result<usize> {
        let n = self.u32()?;
        if n > self.buf.len() - self.pos {
            return Err(Error::Message(format!(
                "count {n} exceeds remaining message"
            )));
        }
        Ok(n)
    }

    fn bigs(&mut self) -> Result<Vec<BigUint>> {
        let n = self.count()?;
        (0..n).map(|_| self.big()).collect()
    }

    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.count()?;
        (0..n).map(|_| self.u32()).collect()
    }

    fn ids(&mut self) -> Result<Vec<ClientId>> {
        Ok(self.usizes()?.into_iter().map(|v| v as ClientId).collect())
    }
}

fn ciphertexts(v: Vec<BigUint>) -> Vec<Ciphertext> {
    v.into_iter().map(Ciphertext).collect()
}

impl Message {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        match self {
            Message::Upload {
                client_id,
                layout,
                ciphertexts,
            } => {
                w.0.push(1);
                w.u32(*client_id as usize);
                w.usizes(layout);
                w.bigs(ciphertexts.iter().map(|c| &c.0));
            }
            Message::Masked(batch) => {
                w.0.push(2);
                w.ids(&batch.clients);
                w.usizes(&batch.layout);
                w.u32(batch.rows.len());
                for row in &batch.rows {
                    w.bigs(row.iter().map(|c| &c.0));
                }
            }
            Message::Scores(matrix) => {
                w.0.push(3);
                w.ids(&matrix.clients);
                w.u32(matrix.total());
                for v in matrix.scores.iter().flatten() {
                    w.0.extend_from_slice(&v.to_bits().to_be_bytes());
                }
            }
            Message::SumRequest(cs) => {
                w.0.push(4);
                w.bigs(cs.iter().map(|c| &c.0));
            }
            Message::SumReply(vs) => {
                w.0.push(5);
                w.bigs(vs.iter());
            }
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        let tag = r.take(1)?[0];
        let msg = match tag {
            1 => Message::Upload {
                client_id: r.u32()? as ClientId,
                layout: r.usizes()?,
                ciphertexts: ciphertexts(r.bigs()?),
            },
            2 => {
                let clients = r.ids()?;
                let layout = r.usizes()?;
                let n = r.count()?;
                let rows = (0..n)
                    .map(|_| r.bigs().map(ciphertexts))
                    .collect::<Result<_>>()?;
                Message::Masked(MaskedBatch {
                    clients,
                    layout,
                    rows,
                })
            }
            3 => {
                let clients = r.ids()?;
                let total = r.u32()?;
                let mut scores = Vec::with_capacity(clients.len());
                for _ in 0..clients.len() {
                    scores.push(
                        (0..total)
                            .map(|_| r.u64().map(f64::from_bits))
                            .collect::<Result<_>>()?,
                    );
                }
                Message::Scores(LayerScoreMatrix { clients, scores })
            }
            4 => Message::SumRequest(ciphertexts(r.bigs()?)),
            5 => Message::SumReply(r.bigs()?),
            t => return Err(Error::Message(format!("unknown tag {t}"))),
        };
        if r.pos != buf.len() {
            return Err(Error::Message(format!(
                "{} trailing bytes",
                buf.len() - r.pos
            )));
        }
        Ok(msg)
    }
}

/// The decrypting party. It holds the keypair and answers scoring and
/// decryption requests.
#[derive(Debug, Clone)]
pub struct CloudPlatform {
    keypair: PaillierKeypair,
    codec: FixedPointCodec,
    pub cof_k: Option<usize>,
}

impl CloudPlatform {
    pub fn new(keypair: PaillierKeypair) -> Self {
        let codec = FixedPointCodec::new(&keypair.public);
        CloudPlatform {
            keypair,
            codec,
            cof_k: None,
        }
    }

    pub fn generate(bits: u64, seed: u64) -> Result<Self> {
        Ok(Self::new(keygen(bits, seed)?))
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.keypair.public
    }

    pub fn codec(&self) -> &FixedPointCodec {
        &self.codec
    }

    pub fn handle(&self, request: &[u8]) -> Result<Vec<u8>> {
        match Message::from_bytes(request)? {
            Message::Masked(batch) => {
                let matrix = private_layer_scoring(&self.keypair, &self.codec, &batch, self.cof_k)?;
                Ok(Message::Scores(matrix).to_bytes())
            }
            Message::SumRequest(cs) => {
                let plain = cs.par_iter().map(|c| self.keypair.decrypt(c)).collect();
                Ok(Message::SumReply(plain).to_bytes())
            }
            other => Err(Error::Message(format!("CP cannot handle {}", other.kind()))),
        }
    }
}

impl Message {
    fn kind(&self) -> &'static str {
        match self {
            Message::Upload { .. } => "upload",
            Message::Masked(_) => "masked batch",
            Message::Scores(_) => "scores",
            Message::SumRequest(_) => "sum request",
            Message::SumReply(_) => "sum reply",
        }
    }
}

/// Result of one private round at the server.
#[derive(Debug, Clone)]
pub struct PrivateRound {
    pub scores: LayerScoreMatrix,
    pub report: AnomalyReport,
    pub benign_set: BTreeSet<ClientId>,
    /// Mean of the benign models, recovered from the encrypted sum.
    pub aggregated: Vec<f64>,
    pub layout: Vec<usize>,
}

/// The aggregating party. It never sees plaintext models: it blinds the
/// uploads for scoring, then sums the benign ciphertexts and has the CP
/// decrypt a freshly blinded total.
#[derive(Debug, Clone)]
pub struct Server {
    pk: PublicKey,
    codec: FixedPointCodec,
    pub mu: f64,
    seed: u64,
}

impl Server {
    pub fn new(pk: PublicKey, mu: f64, seed: u64) -> Self {
        let codec = FixedPointCodec::new(&pk);
        Server {
            pk,
            codec,
            mu,
            seed,
        }
    }

    pub fn round(
        &self,
        round: usize,
        uploads: &[Vec<u8>],
        mut cp: impl FnMut(&[u8]) -> Result<Vec<u8>>,
    ) -> Result<PrivateRound> {
        let mut clients = Vec::with_capacity(uploads.len());
        let mut rows = Vec::with_capacity(uploads.len());
        let mut layout: Option<Vec<usize>> = None;
        for bytes in uploads {
            let Message::Upload {
                client_id,
                layout: l,
                ciphertexts,
            } = Message::from_bytes(bytes)?
            else {
                return Err(Error::Message("expected a client upload".into()));
            };
            match &layout {
                Some(first) if first != &l => {
                    return Err(Error::Shape(format!(
                        "client {client_id} layout {l:?} differs from {first:?}"
                    )))
                }
                Some(_) => {}
                None => layout = Some(l),
            }
            clients.push(client_id);
            rows.push(ciphertexts);
        }
        let layout = layout.ok_or(Error::Empty("no uploads"))?;
        check_layout(&layout, check_rectangular(&rows)?)?;

        let (masked, _mask) =
            mask_round(&self.pk, &rows, seed::derive(self.seed, &[round as u64, 1]))?;
        let request = Message::Masked(MaskedBatch {
            clients: clients.clone(),
            layout: layout.clone(),
            rows: masked,
        });
        let Message::Scores(scores) = Message::from_bytes(&cp(&request.to_bytes())?)? else {
            return Err(Error::Message("expected scores from CP".into()));
        };
        let report = anomaly_detection(&scores, self.mu);

        let m = layout.iter().sum::<usize>();
        let mut sums: Vec<Ciphertext> = rows[report.benign[0]].clone();
        for &i in &report.benign[1..] {
            for (s, c) in sums.iter_mut().zip(&rows[i]) {
                *s = self.pk.add(s, c);
            }
        }
        let blind = MaskVector::random(m, seed::derive(self.seed, &[round as u64, 2]));
        let blinded = apply_mask(
            &self.pk,
            &[sums],
            &blind,
            seed::derive(self.seed, &[round as u64, 3]),
        );
        let request = Message::SumRequest(blinded.into_iter().next().unwrap_or_default());
        let Message::SumReply(plain) = Message::from_bytes(&cp(&request.to_bytes())?)? else {
            return Err(Error::Message("expected decrypted sums from CP".into()));
        };
        if plain.len() != m {
            return Err(Error::Message(format!(
                "CP returned {} sums, expected {m}",
                plain.len()
            )));
        }
        let count = report.benign.len() as f64;
        let aggregated = plain
            .iter()
            .zip(&blind.r)
            .map(|(v, &r)| {
                let unblinded = (v + &self.pk.n - BigUint::from(r)) % &self.pk.n;
                self.codec.decode(&unblinded) / count
            })
            .collect();
        let benign_set = report.benign.iter().map(|&i| clients[i]).collect();
        Ok(PrivateRound {
            scores,
            report,
            benign_set,
            aggregated,
            layout,
        })
    }
}

/// Runs a whole private round in-process: every submission is encrypted as
/// its client would, the server and CP exchange serialized messages, and the
/// outcome is returned in the same shape as the plaintext defenses.
pub fn private_fld(
    cp: &CloudPlatform,
    submissions: &[Submission],
    mu: f64,
    round: usize,
    seed: u64,
) -> Result<DefenseOutcome> {
    let first = submissions.first().ok_or(Error::Empty("no submissions"))?;
    let uploads = submissions
        .iter()
        .map(|s| {
            client_upload(
                cp.public_key(),
                cp.codec(),
                s.client_id,
                &s.params,
                seed::derive(seed, &[round as u64, u64::from(s.client_id)]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let server = Server::new(cp.public_key().clone(), mu, seed);
    let out = server.round(round, &uploads, |req| cp.handle(req))?;
    Ok(DefenseOutcome {
        benign_set: out.benign_set,
        aggregated: first.params.with_flat(&out.aggregated)?,
        per_client_flags: out.report.flags,
        score_matrix: Some(out.scores),
    })
}
