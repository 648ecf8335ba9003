"""Bridge error type."""


class SessionError(Exception):
    """Export session failure: bad model id, tokenizer mismatch, capture error.

    Step-level failures carry the step index in the message.
    """
