import re

SUB_EXCEPTION_SUFFIX = re.compile(r" \(\d+ sub-exceptions?\)$")


def gather_exception_messages(exception: BaseException) -> list[str]:
    """Flatten the messages of an exception and all exceptions grouped inside it.

    Invalid simulation configs and failing record sources are reported as
    `ExceptionGroup`s so that every problem is listed at once.

    Args:
        exception (BaseException): a single exception or an exception group.

    Returns:
        list[str]: the group message followed by the messages of all contained
        exceptions, depth first.
    """
    if not isinstance(exception, BaseExceptionGroup):
        return [str(exception)]
    messages = [SUB_EXCEPTION_SUFFIX.sub("", str(exception))]
    for sub_exception in exception.exceptions:
        messages.extend(
            f"  {message}" for message in gather_exception_messages(sub_exception)
        )
    return messages


def format_exception(exception: BaseException) -> str:
    return "\n".join(gather_exception_messages(exception))
