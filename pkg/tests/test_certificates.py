import json
from fractions import Fraction

import pytest

from fsccert.channel import DelayedActivationSpec, Variant, closed_form_normalized_value, make_delayed_activation
from fsccert.certificates import (
    ThresholdQuery,
    Verdict,
    certificate_search,
    check_R,
    closed_form_band_approx,
    diagonal_pairs,
    encode_rational,
    least_certifying_M,
    least_n_closed_form,
    limsup_slack_audit,
    pair,
    parse_certificate,
    r_threshold,
    read_certificate,
    render_certificate,
    unpair,
    verify_certificate,
    write_certificate,
)
from fsccert.encoding import encode_channel
from fsccert.errors import BudgetExceededError, CertificateMismatchError, DomainError, MalformedEncodingError

QS = [Fraction(0), Fraction(1, 10), Fraction(1, 4), Fraction(1, 2), Fraction(1)]


@pytest.fixture
def good_certificate(good1):
    outcome = certificate_search(ThresholdQuery.of(good1, "1/2"), 1, 6, 6)
    return outcome.certificate


def test_encode_rational_layout():
    assert encode_rational(Fraction(1, 4)).hex() == "00000001" "01" "00000001" "04"
    assert encode_rational(Fraction(-1, 2)).hex() == "00000001" "ff" "00000001" "02"
    assert encode_rational(Fraction(128)).hex() == "00000002" "0080" "00000001" "01"


def test_pair_unpair(good1):
    e = encode_channel(good1)
    for q in QS + [Fraction(-7, 3), Fraction(12345678901234567890, 7)]:
        assert unpair(pair(e, q)) == (e, q)
    assert pair(e, "1/4") == pair(e, Fraction(1, 4))


def test_unpair_rejects_non_canonical(good1):
    e = encode_channel(good1)
    data = pair(e, Fraction(1, 4))
    with pytest.raises(MalformedEncodingError):
        unpair(b"XXXX" + data[4:])
    with pytest.raises(MalformedEncodingError):
        unpair(data + b"\x00")
    with pytest.raises(MalformedEncodingError):
        unpair(data[:-1])
    # numerator padded to two bytes
    q_enc = bytes.fromhex("00000002" "0001" "00000001" "04")
    padded = b"FSCQ" + len(e).to_bytes(4, "big") + e + len(q_enc).to_bytes(4, "big") + q_enc
    with pytest.raises(MalformedEncodingError):
        unpair(padded)


def test_query_of(good1):
    query = ThresholdQuery.of(good1, "1/2")
    assert query.q == Fraction(1, 2)
    assert query.channel == good1
    assert unpair(query.paired) == (query.e, query.q)


def test_diagonal_pairs_order():
    assert list(diagonal_pairs(2, 2)) == [(1, 1), (1, 2), (2, 1), (2, 2)]
    pairs = list(diagonal_pairs(3, 4))
    assert len(pairs) == 12
    assert pairs[:6] == [(1, 1), (1, 2), (2, 1), (1, 3), (2, 2), (3, 1)]


def test_r_threshold():
    assert r_threshold(Fraction(1, 2), 1, 2) == Fraction(1, 4)


def test_check_R_external_band(good1):
    spec = DelayedActivationSpec(1, Variant.GOOD)
    query = ThresholdQuery.of(good1, "1/2")
    cert = check_R(query, 1, 4, 2, approx=closed_form_band_approx(spec))
    assert cert.r == Fraction(1, 2)
    assert cert.verdict is Verdict.HOLDS
    assert cert.strategy == "external"
    assert cert.threshold == Fraction(1, 4)


def test_check_R_target_mode(good1):
    cert = check_R(ThresholdQuery.of(good1, "1/2"), 1, 4, 3)
    assert cert.verdict is Verdict.HOLDS
    assert cert.r == Fraction(1, 2)
    assert cert.value.normalized


def test_check_R_rejects_bad_indices(good1):
    with pytest.raises(DomainError):
        check_R(ThresholdQuery.of(good1, 0), 1, 0, 1)


def test_check_R_budget_is_indeterminate(good1):
    cert = check_R(ThresholdQuery.of(good1, 0), 1, 1, 1, budget=2, mode="report")
    assert cert.verdict is Verdict.INDETERMINATE
    assert cert.r is None


def test_band_approx_rejects_wide_offset():
    with pytest.raises(DomainError):
        closed_form_band_approx(DelayedActivationSpec(1, Variant.GOOD), Fraction(3, 2))


def test_soundness_and_completeness_on_families():
    for N in (1, 2):
        for variant in Variant:
            spec = DelayedActivationSpec(N, variant)
            channel = make_delayed_activation(spec)
            for q in QS:
                query = ThresholdQuery.of(channel, q)
                bands = {off: closed_form_band_approx(spec, off) for off in (-1, 0, 1)}
                for k in range(5):
                    for n in range(1, 7):
                        a_n = closed_form_normalized_value(spec, n)
                        for M in range(1, 9):
                            for off, approx in bands.items():
                                cert = check_R(query, k, n, M, approx=approx)
                                if cert.verdict is Verdict.HOLDS:
                                    assert a_n > q - Fraction(1, 2 ** k)
                        M_star = least_certifying_M(a_n, q, k)
                        if M_star is not None:
                            cert = check_R(query, k, n, M_star, approx=bands[-1])
                            assert cert.verdict is Verdict.HOLDS


def test_least_certifying_M():
    assert least_certifying_M(Fraction(1, 2), Fraction(1, 2), 1) == 3
    assert least_certifying_M(Fraction(0), Fraction(1, 2), 1) is None


def test_least_n_closed_form():
    good = DelayedActivationSpec(2, Variant.GOOD)
    assert least_n_closed_form(good, Fraction(-1, 4)) == 1
    assert least_n_closed_form(good, Fraction(0)) == 4
    assert least_n_closed_form(good, Fraction(1, 2)) == 7
    assert least_n_closed_form(good, Fraction(1)) is None
    assert least_n_closed_form(DelayedActivationSpec(2, Variant.BAD), Fraction(0)) is None


def test_limsup_audit():
    good = limsup_slack_audit(DelayedActivationSpec(1, Variant.GOOD), Fraction(1, 2), 4, 64)
    assert good.status == "agree" and good.consistent
    assert [row.least_n for row in good.rows] == [1, 3, 3, 4, 4]
    bad = limsup_slack_audit(DelayedActivationSpec(1, Variant.BAD), Fraction(1, 2), 4, 64)
    assert bad.status == "capacity-below-q" and bad.consistent
    assert [row.least_n for row in bad.rows] == [1, None, None, None, None]
    capped = limsup_slack_audit(DelayedActivationSpec(1, Variant.GOOD), Fraction(1), 6, 8)
    assert capped.status == "horizon-cap"
    assert not capped.consistent


def test_search_finds_first_holding_cell(good_certificate):
    assert good_certificate.verdict is Verdict.HOLDS
    assert (good_certificate.n, good_certificate.M) == (3, 2)
    assert good_certificate.r == Fraction(5, 16)


def test_search_frontier(good1):
    outcome = certificate_search(ThresholdQuery.of(good1, "1/2"), 1, 6, 6)
    assert outcome.found
    assert len(outcome.frontier) == 9
    assert outcome.frontier[-1] == (3, 2, "holds")


def test_search_exhaustion(bad1):
    outcome = certificate_search(ThresholdQuery.of(bad1, "1/2"), 1, 2, 2)
    assert not outcome.found
    assert [cell[2] for cell in outcome.frontier] == ["fails"] * 4


def test_search_budget_reports_frontier(good1):
    with pytest.raises(BudgetExceededError) as exc:
        certificate_search(ThresholdQuery.of(good1, 0), 1, 2, 2, budget=2, mode="report")
    assert exc.value.frontier == [(1, 1, "indeterminate")]


def test_certificate_file_round_trip(good_certificate, tmp_path):
    text = render_certificate(good_certificate)
    assert text.endswith("\n")
    data = json.loads(text)
    assert data["format"] == "fsccert-certificate/1"
    assert data["verdict"] == "holds"
    assert len(data["digest"]) == 64
    path = write_certificate(good_certificate, tmp_path / "certs" / "good.json")
    assert read_certificate(path) == parse_certificate(text)


def test_verify_accepts_untouched(good_certificate, good1):
    text = render_certificate(good_certificate)
    replayed = verify_certificate(text)
    assert replayed.verdict is Verdict.HOLDS
    assert verify_certificate(text.encode("utf-8"), channel=good1).r == good_certificate.r


def test_verify_rejects_wrong_channel(good_certificate, bad1):
    with pytest.raises(CertificateMismatchError) as exc:
        verify_certificate(render_certificate(good_certificate), channel=bad1)
    assert exc.value.reason == "hash"


def test_verify_rejects_edited_verdict(good_certificate):
    text = render_certificate(good_certificate).replace('"verdict": "holds"', '"verdict": "fails"')
    with pytest.raises(CertificateMismatchError):
        verify_certificate(text)


def test_verify_rejects_single_byte_tampers(good_certificate, rng):
    raw = render_certificate(good_certificate).encode("utf-8")
    for _ in range(20):
        i = rng.randrange(len(raw))
        replacement = b"7" if raw[i:i + 1] != b"7" else b"3"
        tampered = raw[:i] + replacement + raw[i + 1:]
        with pytest.raises(CertificateMismatchError):
            verify_certificate(tampered)


def test_verify_rejects_external_strategy(good1):
    spec = DelayedActivationSpec(1, Variant.GOOD)
    cert = check_R(ThresholdQuery.of(good1, "1/2"), 1, 4, 2, approx=closed_form_band_approx(spec))
    with pytest.raises(CertificateMismatchError) as exc:
        verify_certificate(render_certificate(cert))
    assert exc.value.reason == "provenance"


def test_verify_rejects_garbage():
    with pytest.raises(CertificateMismatchError) as exc:
        verify_certificate("not a certificate")
    assert exc.value.reason == "encoding"


@pytest.mark.slow
def test_replay_twenty_certificates(good1, bad1):
    cells = [(1, 1), (2, 1), (1, 2), (2, 2), (3, 1)]
    texts = []
    for channel in (good1, bad1):
        for q in (Fraction(0), Fraction(1, 2)):
            query = ThresholdQuery.of(channel, q)
            texts.extend(render_certificate(check_R(query, 1, n, M)) for n, M in cells)
    assert len(texts) == 20
    for text in texts:
        replayed = verify_certificate(text)
        assert render_certificate(replayed) == text
