from mosaicmem.cli.main import main

raise SystemExit(main())
