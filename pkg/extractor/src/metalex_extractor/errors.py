class ExtractorError(Exception):
    """Base for everything this package raises on purpose."""


class ConfigError(ExtractorError):
    pass


class DataError(ExtractorError):
    pass
