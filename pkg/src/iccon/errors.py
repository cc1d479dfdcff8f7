class ConfigError(ValueError):
    """Invalid configuration or operation input.

    ``key`` and ``line`` are filled in when the error comes from a parsed
    configuration document.
    """

    def __init__(self, message, key=None, line=None):
        self.reason = message
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
