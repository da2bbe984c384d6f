"""Textbook AES-128 single-block encryption, written from FIPS-197.

Slow and only meant as an independent check on the library cipher used by
``fogtrace.ids``.
"""


def _xtime(a):
    a <<= 1
    return (a ^ 0x1B) & 0xFF if a & 0x100 else a


def _gmul(a, b):
    out = 0
    while b:
        if b & 1:
            out ^= a
        a = _xtime(a)
        b >>= 1
    return out


def _build_sbox():
    # multiplicative inverse in GF(2^8) followed by the affine map
    inverse = [0] * 256
    for x in range(1, 256):
        for y in range(1, 256):
            if _gmul(x, y) == 1:
                inverse[x] = y
                break
    sbox = []
    for x in range(256):
        b = inverse[x]
        s = b
        for shift in range(1, 5):
            s ^= ((b << shift) | (b >> (8 - shift))) & 0xFF
        sbox.append(s ^ 0x63)
    return sbox


SBOX = _build_sbox()


def _expand_key(key: bytes):
    words = [list(key[i:i + 4]) for i in range(0, 16, 4)]
    rcon = 1
    for i in range(4, 44):
        temp = list(words[i - 1])
        if i % 4 == 0:
            temp = temp[1:] + temp[:1]
            temp = [SBOX[b] for b in temp]
            temp[0] ^= rcon
            rcon = _xtime(rcon)
        words.append([a ^ b for a, b in zip(words[i - 4], temp)])
    return [sum(words[4 * r:4 * r + 4], []) for r in range(11)]


def _shift_rows(state):
    # state is column-major: state[c*4 + r]
    return [state[((c + r) % 4) * 4 + r] for c in range(4) for r in range(4)]


def _mix_columns(state):
    out = []
    for c in range(4):
        a = state[c * 4:c * 4 + 4]
        out.extend([
            _gmul(a[0], 2) ^ _gmul(a[1], 3) ^ a[2] ^ a[3],
            a[0] ^ _gmul(a[1], 2) ^ _gmul(a[2], 3) ^ a[3],
            a[0] ^ a[1] ^ _gmul(a[2], 2) ^ _gmul(a[3], 3),
            _gmul(a[0], 3) ^ a[1] ^ a[2] ^ _gmul(a[3], 2),
        ])
    return out


def aes128_encrypt_block(key: bytes, block: bytes) -> bytes:
    assert len(key) == 16 and len(block) == 16
    round_keys = _expand_key(key)
    state = [b ^ k for b, k in zip(block, round_keys[0])]
    for rnd in range(1, 11):
        state = [SBOX[b] for b in state]
        state = _shift_rows(state)
        if rnd != 10:
            state = _mix_columns(state)
        state = [b ^ k for b, k in zip(state, round_keys[rnd])]
    return bytes(state)
