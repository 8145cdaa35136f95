#!/usr/bin/env python3
"""Regenerates the known-answer files in this directory.

Uses kyber-py, dilithium-py and pyca/cryptography, which share no code with
the Rust implementations they check. Seeds are derived from SHAKE256 so the
output is reproducible:

    pip install kyber-py dilithium-py cryptography
    python3 generate.py
"""
import hashlib
import os

from kyber_py.ml_kem import ML_KEM_512, ML_KEM_768, ML_KEM_1024
from dilithium_py.ml_dsa import ML_DSA_44, ML_DSA_65, ML_DSA_87
from cryptography.hazmat.primitives.asymmetric import ed448, ed25519, x25519
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF, HKDFExpand
from cryptography.hazmat.primitives import hashes, serialization, hmac

HERE = os.path.dirname(os.path.abspath(__file__))


def det(label, i, n):
    return hashlib.shake_256(f"qran-kat/{label}/{i}".encode()).digest(n)


def write(name, alg, records):
    with open(os.path.join(HERE, name), "w") as f:
        f.write(f"# generated by generate.py\nalg={alg}\n")
        for rec in records:
            f.write("\n")
            for k, v in rec:
                f.write(f"{k}={v.hex()}\n")


def kem(alg, impl, count):
    recs, rej = [], []
    for i in range(count):
        seed = det(alg + "/keygen", i, 64)
        eseed = det(alg + "/encaps", i, 32)
        ek, dk = impl.key_derive(seed)
        ss, ct = impl._encaps_internal(ek, eseed)
        assert impl.decaps(dk, ct) == ss
        recs.append([("seed", seed), ("eseed", eseed), ("pk", ek), ("sk", dk), ("ct", ct), ("ss", ss)])
        bad = bytearray(ct)
        bad[i % len(bad)] ^= 1 << (i % 8)
        rej.append([("sk", dk), ("ct", bytes(bad)), ("ss", impl.decaps(dk, bytes(bad)))])
    write(f"{alg}.kat", alg, recs)
    write(f"{alg}-reject.kat", alg, rej)


def dsa(alg, impl, count):
    recs = []
    for i in range(count):
        seed = det(alg + "/keygen", i, 32)
        msg = det(alg + "/msg", i, (i * 37) % 200)
        ctx = det(alg + "/ctx", i, (i * 11) % 40) if i % 3 else b""
        pk, sk = impl.key_derive(seed)
        rec = [("seed", seed), ("pk", pk), ("sk", sk), ("msg", msg), ("ctx", ctx)]
        m_prime = bytes([0, len(ctx)]) + ctx + msg
        if i % 2:
            rnd = det(alg + "/rnd", i, 32)
            rec.append(("rnd", rnd))
        else:
            rnd = bytes(32)
        sig = impl._sign_internal(sk, m_prime, rnd)
        assert impl.verify(pk, msg, sig, ctx)
        rec.append(("sig", sig))
        recs.append(rec)
    write(f"{alg}.kat", alg, recs)


def classical():
    raw = serialization.Encoding.Raw
    rawpub = serialization.PublicFormat.Raw
    recs = []
    for i in range(8):
        seed = det("Ed448/keygen", i, 57)
        msg = det("Ed448/msg", i, i * 13)
        sk = ed448.Ed448PrivateKey.from_private_bytes(seed)
        recs.append([("seed", seed), ("pk", sk.public_key().public_bytes(raw, rawpub)),
                     ("msg", msg), ("ctx", b""), ("sig", sk.sign(msg))])
    write("Ed448.kat", "Ed448", recs)
    recs = []
    for i in range(8):
        seed = det("Ed25519/keygen", i, 32)
        msg = det("Ed25519/msg", i, i * 13)
        sk = ed25519.Ed25519PrivateKey.from_private_bytes(seed)
        recs.append([("seed", seed), ("pk", sk.public_key().public_bytes(raw, rawpub)),
                     ("msg", msg), ("ctx", b""), ("sig", sk.sign(msg))])
    write("Ed25519.kat", "Ed25519", recs)
    recs = []
    for i in range(8):
        seed = det("X25519/keygen", i, 32)
        eseed = det("X25519/encaps", i, 32)
        a = x25519.X25519PrivateKey.from_private_bytes(seed)
        e = x25519.X25519PrivateKey.from_private_bytes(eseed)
        pk = a.public_key().public_bytes(raw, rawpub)
        ct = e.public_key().public_bytes(raw, rawpub)
        ss = e.exchange(a.public_key())
        recs.append([("seed", seed), ("eseed", eseed), ("pk", pk), ("sk", seed), ("ct", ct), ("ss", ss)])
    write("X25519.kat", "X25519", recs)


def symmetric():
    recs = []
    for i in range(6):
        key = det("AES-256-GCM/key", i, 32)
        nonce = det("AES-256-GCM/nonce", i, 12)
        aad = det("AES-256-GCM/aad", i, i * 7)
        pt = det("AES-256-GCM/pt", i, i * 29)
        recs.append([("key", key), ("nonce", nonce), ("aad", aad), ("msg", pt),
                     ("ct", AESGCM(key).encrypt(nonce, pt, aad))])
    write("AES-256-GCM.kat", "AES-256-GCM", recs)
    for h, name in [(hashes.SHA384(), "HKDF-SHA-384"), (hashes.SHA256(), "HKDF-SHA-256")]:
        recs = []
        for i in range(4):
            salt = det(name + "/salt", i, 13 + i) if i else b""
            ikm = det(name + "/ikm", i, 22 + i)
            info = det(name + "/info", i, i * 5)
            length = 42 + i * 31
            hm = hmac.HMAC(salt, h)
            hm.update(ikm)
            prk = hm.finalize()
            okm = HKDFExpand(algorithm=h, length=length, info=info).derive(prk)
            assert okm == HKDF(algorithm=h, length=length, salt=salt or None, info=info).derive(ikm)
            recs.append([("salt", salt), ("ikm", ikm), ("info", info), ("prk", prk), ("okm", okm)])
        write(f"{name}.kat", name, recs)

if __name__ == "__main__":
    kem("ML-KEM-512", ML_KEM_512, 5)
    kem("ML-KEM-768", ML_KEM_768, 25)
    kem("ML-KEM-1024", ML_KEM_1024, 5)
    dsa("ML-DSA-44", ML_DSA_44, 5)
    dsa("ML-DSA-65", ML_DSA_65, 25)
    dsa("ML-DSA-87", ML_DSA_87, 5)
    classical()
    symmetric()
