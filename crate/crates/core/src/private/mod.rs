//! Private Layer Scoring over Paillier-encrypted uploads.

mod codec;
mod paillier;
mod protocol;

pub use codec::{FixedPointCodec, DEFAULT_SCALE_BITS};
pub use paillier::{
    is_probable_prime, keygen, random_below, Ciphertext, PaillierKeypair, PublicKey, SecretKey,
    SUPPORTED_BITS,
};
pub use protocol::{
    apply_mask, client_upload, encrypt_params, fixed_point_layer_scoring, mask_round, private_fld,
    private_layer_scoring, CloudPlatform, MaskVector, MaskedBatch, Message, PrivateRound, Server,
    MASK_MAX,
};
