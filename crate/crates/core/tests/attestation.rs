use eai_core::attestation::{verify_attestation, SignerIdentity, VerifyOutcome};
use eai_core::Address;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_keys_round_trip_and_reject_cross_key() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let signers: Vec<_> = (0..100).map(|_| SignerIdentity::from_seed(rng.gen())).collect();
    for (i, s) in signers.iter().enumerate() {
        let now = rng.gen_range(0..1u64 << 40);
        let ttl = rng.gen_range(1..100_000);
        let att = s.sign(Address(rng.gen()), rng.gen(), ttl, rng.gen(), now).unwrap();
        assert_eq!(verify_attestation(&s.public_key(), &att, now), VerifyOutcome::Valid);
        assert_eq!(verify_attestation(&s.public_key(), &att, att.expires_at - 1), VerifyOutcome::Valid);
        assert_eq!(verify_attestation(&s.public_key(), &att, att.expires_at), VerifyOutcome::Expired);
        let other = &signers[(i + 1) % signers.len()];
        assert_eq!(verify_attestation(&other.public_key(), &att, now), VerifyOutcome::BadSignature);
    }
}

#[test]
fn every_field_is_bound_by_the_signature() {
    let s = SignerIdentity::from_seed([5; 32]);
    let base = s.sign(Address([1; 20]), true, 100, 42, 1_000).unwrap();
    let pk = s.public_key();
    let mut a = base.clone();
    a.expires_at += 1;
    assert_eq!(pk.verify(&a, 1_000), VerifyOutcome::BadSignature);
    let mut a = base.clone();
    a.nonce += 1;
    assert_eq!(pk.verify(&a, 1_000), VerifyOutcome::BadSignature);
    let mut a = base.clone();
    a.signature.bytes[63] ^= 0x80;
    assert_eq!(pk.verify(&a, 1_000), VerifyOutcome::BadSignature);
    assert_eq!(pk.verify(&base, 1_000), VerifyOutcome::Valid);
}
