import json

import numpy as np
import pytest

from emoxl import tensor as T
from emoxl.cli import main as cli_main


@pytest.fixture(autouse=True)
def float64_and_finite_checks():
    """Numeric tests run in 64-bit with the finiteness debug scan on."""
    T.set_default_dtype(np.float64)
    T.set_debug_finite_checks(True)
    yield
    T.set_debug_finite_checks(False)
    T.set_default_dtype(np.float64)


CLASSIFIER_CONFIG = {"d_emb": 16, "hidden": 24, "dense": 16, "dropout": 0.0,
                     "epochs": 35, "batch": 16, "lr": 0.02, "seed": 1}
CHATBOT_CONFIG = {"d_model": 16, "n_heads": 2, "d_ff": 16, "n_enc_layers": 1,
                  "n_dec_layers": 1, "mem_len": 8, "max_gen_len": 12,
                  "rel_base": 64.0, "dropout": 0.0, "epochs": 20, "batch": 16,
                  "lr": 0.01, "seed": 1}
STACK_DATA = "synth:96"


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def trained_stack(tmp_path_factory):
    """Classifier + chatbot checkpoints trained once, on the same corpus."""
    root = tmp_path_factory.mktemp("stack")
    clf_cfg = root / "clf.json"
    clf_cfg.write_text(json.dumps(CLASSIFIER_CONFIG))
    bot_cfg = root / "bot.json"
    bot_cfg.write_text(json.dumps(CHATBOT_CONFIG))
    clf_path = root / "classifier.ckpt"
    bot_path = root / "chatbot.ckpt"
    assert cli_main(["train-classifier", "--data", STACK_DATA,
                     "--config", str(clf_cfg), "--out", str(clf_path)]) == 0
    assert cli_main(["train-chatbot", "--data", STACK_DATA,
                     "--config", str(bot_cfg), "--out", str(bot_path)]) == 0
    return {"root": root, "classifier": clf_path, "chatbot": bot_path,
            "clf_config": clf_cfg, "bot_config": bot_cfg}
