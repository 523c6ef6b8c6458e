"""Smoke test for the interviewsim extension module.

Build and run:
    cargo build -p interviewsim-python --release
    cp target/release/libinterviewsim.so python/interviewsim.so
    python3 python/smoke_test.py
"""

import math
import sys

sys.path.insert(0, "python")

import interviewsim


def approx(a, b, tol=1e-12):
    assert abs(a - b) < tol, f"{a} != {b}"


def main():
    assert interviewsim.tokenize("Java 数据库") == ["java", "数", "据", "库"]
    approx(interviewsim.cosine_similarity("java linux", "java linux"), 1.0)
    assert interviewsim.cosine_similarity("java", "linux") == 0.0

    scrubbed = interviewsim.scrub_pii(
        "Zhang Wei, call 138-0013-8000, mail zw@example.com", names=["Zhang Wei"]
    )
    assert scrubbed == "<NAME>, call <PHONE>, mail <EMAIL>", scrubbed

    approx(interviewsim.sigmoid(0.0), 0.5)
    neutral = interviewsim.fuse(5.0, 5.0)
    approx(neutral["fused"], 0.5)
    assert neutral["accept"]

    strong = interviewsim.fuse(9.0, 8.0)
    assert strong["fused"] > 0.5 and strong["accept"]
    weak = interviewsim.fuse(2.0, 3.0)
    assert weak["fused"] < 0.5 and not weak["accept"]

    decision = interviewsim.handshake((9.0, 8.0), (2.0, 3.0))
    assert decision["interviewer"]["accept"] and not decision["candidate"]["accept"]
    assert not decision["matched"]
    assert interviewsim.handshake((9.0, 8.0), (8.0, 9.0))["matched"]

    items = [("j1", 0.9), ("j2", 0.8), ("j3", 0.7)]
    relevant = ["j1", "j3"]
    expected_ndcg = (1.0 + 1.0 / math.log2(4)) / (1.0 + 1.0 / math.log2(3))
    approx(interviewsim.ndcg_at_k(items, relevant, 3), expected_ndcg)
    approx(interviewsim.precision_at_k(items, relevant, 3), 2 / 3)
    approx(interviewsim.recall_at_k(items, relevant, 3), 1.0)
    approx(interviewsim.mrr_at_k(items, relevant, 3), 1.0)

    approx(interviewsim.bleu_n("a a a", "a b", 1), 1 / 3)
    p, r, f1 = interviewsim.macro_prf([(True, True), (False, False)])
    assert (p, r, f1) == (1.0, 1.0, 1.0)

    session = interviewsim.run_scripted_session(
        job_text="Backend engineer: Java, SQL.",
        resume_text="Five years Java backend.",
        questions=["Tell me about your Java work.", "How do you tune SQL?"],
        answers=["I built services for five years.", "I read query plans first."],
    )
    assert session["completed"]
    assert session["backend_calls"] == 4
    assert len(session["turns"]) == 2
    assert session["rendered"].startswith("Q1: Tell me about your Java work.")

    print("smoke test passed")


if __name__ == "__main__":
    main()
