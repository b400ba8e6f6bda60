#!/usr/bin/env node
// Minimal native-solc lookalike over soljson: supports --version and --standard-json.
const path = require('path');
const solc = require(path.join(__dirname, 'package', 'index.js'));
const args = process.argv.slice(2);
if (args.includes('--version')) {
  console.log('solc, the solidity compiler commandline interface');
  console.log('Version: ' + solc.version());
  process.exit(0);
}
if (args.includes('--standard-json')) {
  let input = '';
  process.stdin.setEncoding('utf8');
  process.stdin.on('data', (c) => { input += c; });
  process.stdin.on('end', () => { process.stdout.write(solc.compile(input)); process.stdout.write('\n'); });
} else {
  console.error('only --version and --standard-json are supported');
  process.exit(1);
}
