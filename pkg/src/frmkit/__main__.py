from frmkit.cli import main

raise SystemExit(main())
