import sys

from PathGauge.plugin_ui.main_application import ApplicationStarter


def main() -> None:
    sys.exit(ApplicationStarter().start())


if __name__ == "__main__":
    main()
