from .core import (
    COEFFICIENTS,
    SLOTS,
    Ciphertext,
    DecryptionError,
    Plaintext,
    RnsPoly,
    RotationKey,
    SecretKey,
    context,
    crt_reconstruct,
    decode,
    decrypt,
    encode,
    encrypt,
    galois_element,
    gen_rotation_key,
    keygen,
    noise_budget,
    plaintext_from_coefficients,
)
from .evaluator import Evaluator, KeyMismatchError, MissingKeyError, PreparedPlaintext
from .params import HeParams, load_params
