"""Internationalization (i18n) of the experiment progress messages."""

# Chinese messages
MESSAGES_ZH = {
    "experiment": "实验",
    "model": "模型",
    "validate": "校验模型",
    "constants": "增长常数",
    "blocks": "区块划分",
    "decompose": "鞅分解",
    "diagnose": "诊断",
    "report": "写入报告",
    "passed": "通过",
    "failed": "失败",
    "skipped": "跳过",
    "done": "完成",
    "outputs_written": "输出已写入",
    "checks": "检查项",
    "elapsed": "耗时",
}

# English messages
MESSAGES_EN = {
    "experiment": "Experiment",
    "model": "Model",
    "validate": "Validate model",
    "constants": "Growth constants",
    "blocks": "Block partition",
    "decompose": "Martingale decomposition",
    "diagnose": "Diagnostics",
    "report": "Write report",
    "passed": "passed",
    "failed": "FAILED",
    "skipped": "skipped",
    "done": "Done",
    "outputs_written": "Outputs written to",
    "checks": "checks",
    "elapsed": "elapsed",
}


def get_messages(lang: str = "en") -> dict:
    """
    Get progress messages by language.

    Args:
        lang: Language code, 'cn' for Chinese, 'en' for English.

    Returns:
        Dictionary of messages.
    """
    if lang == "cn":
        return MESSAGES_ZH
    return MESSAGES_EN


def get_message(key: str, lang: str = "en") -> str:
    """
    Get a single progress message by key and language.

    Args:
        key: Message key.
        lang: Language code, 'cn' for Chinese, 'en' for English.

    Returns:
        Message string.
    """
    return get_messages(lang).get(key, key)
